#include "bffg/ctmc.hpp"

#include <algorithm>

#include <unsupported/Eigen/MatrixFunctions>

namespace bffg {

namespace {

constexpr int kBaseCells = 64;
constexpr double kEnvelopeSafety = 1.2;
constexpr int kWeightNodes = 8;

void check_generator(const Mat& q, const char* what) {
  if (q.rows() != q.cols()) throw ValidationError(std::string(what) + ": not square");
  for (int i = 0; i < q.rows(); ++i) {
    double s = 0;
    for (int j = 0; j < q.cols(); ++j) {
      if (i != j && q(i, j) < 0)
        throw ValidationError(std::string(what) + ": negative off-diagonal rate");
      s += q(i, j);
    }
    if (std::abs(s) > 1e-9 * std::max(1.0, q.cwiseAbs().maxCoeff()))
      throw ValidationError(std::string(what) + ": row " + std::to_string(i) +
                            " does not sum to zero");
  }
}

/* Total guided exit rate out of x against potential values gv; +inf when the
 * current state carries zero potential. */
double exit_rate(const Mat& q, const Vec& gv, int x) {
  if (gv[x] <= 0) return std::numeric_limits<double>::infinity();
  double s = 0;
  for (int y = 0; y < q.cols(); ++y)
    if (y != x) s += q(x, y) * gv[y];
  return s / gv[x];
}

}  // namespace

CTMCKernel CTMCKernel::matched(const Mat& q, double tau) { return with_aux(q, q, tau); }

CTMCKernel CTMCKernel::with_aux(const Mat& q, const Mat& aux, double tau) {
  check_generator(q, "ctmc rates");
  check_generator(aux, "ctmc comparison rates");
  if (q.rows() != aux.rows()) throw ValidationError("ctmc: state space mismatch");
  if (tau <= 0) throw ValidationError("ctmc: edge length must be positive");
  return {q, aux, tau};
}

Vec expm_action_uniformization(const Mat& q, const Vec& v, double t) {
  if (t < 0) throw ValidationError("expm_action_uniformization: negative time");
  double lam = 0;
  for (int i = 0; i < q.rows(); ++i) lam = std::max(lam, -q(i, i));
  if (lam * t == 0) return v;
  Mat p = q / lam + Mat::Identity(q.rows(), q.cols());
  double mu = lam * t;
  // Poisson(mu) weights by recurrence; stop once the accumulated mass leaves
  // a tail below 1e-15 (and we are past the mode).
  double logw = -mu;
  double w = std::exp(logw);
  Vec term = v;
  Vec acc = w * term;
  double mass = w;
  for (int k = 1; k < 100000; ++k) {
    term = p * term;
    if (w > 0) {
      w *= mu / k;
    } else {
      // underflowed leading weights (large mu): track in logs until positive
      logw += std::log(mu / k);
      w = std::exp(logw);
    }
    acc += w * term;
    mass += w;
    if (k > mu && 1.0 - mass < 1e-15) break;
  }
  return acc;
}

Mat expm_dense(const Mat& q, double t) { return (q * t).exp(); }

CTMCBackward ctmc_solve_backward(const CTMCKernel& k, const VectorPotential& g_child) {
  if (g_child.size() != k.states())
    throw ValidationError("ctmc_solve_backward: potential size mismatch");
  CTMCBackward b;
  b.aux_rates = k.aux_rates;
  b.tau = k.tau;
  // uniform cells plus geometric refinement of the final cell
  for (int i = 0; i <= kBaseCells; ++i) b.grid.push_back(k.tau * i / kBaseCells);
  double w = k.tau / kBaseCells;
  for (int j = 1; j <= 40; ++j) {
    double t = k.tau - w * std::pow(0.5, j);
    if (t <= b.grid[kBaseCells - 1] || k.tau - t < 1e-14 * k.tau) break;
    b.grid.insert(b.grid.end() - 1, t);
  }
  std::sort(b.grid.begin(), b.grid.end());
  Vec g_t(g_child.size());
  for (int i = 0; i < g_child.size(); ++i)
    g_t[i] = g_child.log_values[i] == kNegInf ? 0.0 : std::exp(g_child.log_values[i]);
  int n = static_cast<int>(b.grid.size());
  b.grid_g.assign(n, Vec());
  b.grid_g[n - 1] = g_t;
  for (int i = n - 2; i >= 0; --i)
    b.grid_g[i] =
        expm_action_uniformization(k.aux_rates, b.grid_g[i + 1], b.grid[i + 1] - b.grid[i]);
  return b;
}

VectorPotential ctmc_pullback(const CTMCKernel& k, const VectorPotential& g_child) {
  if (g_child.size() != k.states())
    throw ValidationError("ctmc_pullback: potential size mismatch");
  Vec g_t(g_child.size());
  for (int i = 0; i < g_child.size(); ++i)
    g_t[i] = g_child.log_values[i] == kNegInf ? 0.0 : std::exp(g_child.log_values[i]);
  Vec g0;
  if (k.states() <= 1000)
    g0 = expm_dense(k.aux_rates, k.tau) * g_t;
  else
    g0 = expm_action_uniformization(k.aux_rates, g_t, k.tau);
  Vec out(g0.size());
  for (int i = 0; i < g0.size(); ++i) out[i] = g0[i] > 0 ? std::log(g0[i]) : kNegInf;
  return {out};
}

Vec ctmc_eval_g(const CTMCBackward& b, double u) {
  if (u < 0 || u > b.tau + 1e-12) throw ValidationError("ctmc_eval_g: time outside the edge");
  auto it = std::lower_bound(b.grid.begin(), b.grid.end(), u);
  int j = static_cast<int>(it - b.grid.begin());
  if (j >= static_cast<int>(b.grid.size())) j = static_cast<int>(b.grid.size()) - 1;
  return expm_action_uniformization(b.aux_rates, b.grid_g[j], b.grid[j] - u);
}

Mat ctmc_guided_rates(const CTMCKernel& k, const CTMCBackward& b, double u) {
  Vec gv = ctmc_eval_g(b, u);
  int n = k.states();
  Mat out = Mat::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    if (gv[x] <= 0) continue;  // state unreachable under the conditioning
    double row = 0;
    for (int y = 0; y < n; ++y) {
      if (y == x) continue;
      out(x, y) = k.rates(x, y) * gv[y] / gv[x];
      row += out(x, y);
    }
    out(x, x) = -row;
  }
  return out;
}

CTMCPath ctmc_guided_simulate(const CTMCKernel& k, const CTMCBackward& b, int x0, Rng& rng) {
  if (x0 < 0 || x0 >= k.states()) throw ValidationError("ctmc_guided_simulate: bad start state");
  CTMCPath path;
  path.tau = k.tau;
  path.states.push_back(x0);
  int x = x0;
  double t = 0;
  size_t cell = 0;
  const size_t ncells = b.grid.size() - 1;
  while (t < b.tau) {
    while (cell + 1 < ncells && b.grid[cell + 1] <= t) ++cell;
    double cell_end = b.grid[cell + 1];
    double left = exit_rate(k.rates, b.grid_g[cell], x);
    double right = exit_rate(k.rates, b.grid_g[cell + 1], x);
    // in the last sliver the terminal potential may vanish for x; fall back
    // to the left endpoint (the sliver is ~1e-14 of the edge)
    double bound = std::isfinite(right) ? std::max(left, right) : left;
    if (!std::isfinite(bound))
      throw NumericError("ctmc_guided_simulate: state has zero potential mass");
    bound *= kEnvelopeSafety;
    if (bound <= 0) {  // exits impossible in this cell
      t = cell_end;
      continue;
    }
    double prop = t + draw_exponential(rng, bound);
    if (prop >= cell_end) {
      t = cell_end;
      continue;
    }
    t = prop;
    Vec gv = ctmc_eval_g(b, t);
    if (gv[x] <= 0)
      throw NumericError("ctmc_guided_simulate: potential vanished along the path");
    Vec w = Vec::Zero(k.states());
    double total = 0;
    for (int y = 0; y < k.states(); ++y) {
      if (y == x) continue;
      w[y] = k.rates(x, y) * gv[y] / gv[x];
      total += w[y];
    }
    if (draw_uniform(rng) * bound <= total) {
      x = draw_categorical(rng, w);
      path.jump_times.push_back(t);
      path.states.push_back(x);
    }
  }
  return path;
}

double ctmc_log_weight(const CTMCKernel& k, const CTMCBackward& b, const CTMCPath& path) {
  const GaussRule rule = legendre_average_rule(kWeightNodes);
  Mat diff = k.rates - k.aux_rates;
  double total = 0;
  double start = 0;
  for (size_t seg = 0; seg <= path.jump_times.size(); ++seg) {
    double end = seg < path.jump_times.size() ? path.jump_times[seg] : b.tau;
    int x = path.states[seg];
    double len = end - start;
    if (len > 0) {
      double acc = 0;
      for (int i = 0; i < rule.nodes.size(); ++i) {
        double u = start + len * rule.nodes[i];
        Vec gv = ctmc_eval_g(b, u);
        if (gv[x] <= 0)
          throw NumericError("ctmc_log_weight: potential vanished under the path");
        double f = 0;
        for (int y = 0; y < k.states(); ++y) f += diff(x, y) * gv[y];
        acc += rule.weights[i] * (f / gv[x]);
      }
      total += len * acc;
    }
    start = end;
  }
  return total;
}

double ctmc_leaf_log_weight(const CTMCKernel& k, int obs, const VectorPotential& message,
                            int x) {
  if (obs < 0 || obs >= k.states())
    throw ValidationError("ctmc_leaf_log_weight: observation out of range");
  Vec unit = Vec::Zero(k.states());
  unit[obs] = 1.0;
  Vec gt = expm_action_uniformization(k.rates, unit, k.tau);
  double num = gt[x] > 0 ? std::log(gt[x]) : kNegInf;
  if (num == kNegInf && message.log_values[x] == kNegInf)
    throw NumericError("ctmc_leaf_log_weight: observation unreachable from sampled state");
  return num - message.log_values[x];
}

}  // namespace bffg
