#include "bffg/chebyshev.hpp"

namespace bffg {

namespace {

constexpr double kDefaultMaxStep = 1e-3;

/* Monomial coefficient vectors (index = power), fixed length cap+1. */
Vec poly_mul(const Vec& p, const Vec& q, int cap) {
  Vec out = Vec::Zero(cap + 1);
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] == 0) continue;
    for (int j = 0; j < q.size(); ++j) {
      if (q[j] == 0 || i + j > cap) continue;
      out[i + j] += p[i] * q[j];
    }
  }
  return out;
}

Vec poly_deriv(const Vec& p) {
  Vec out = Vec::Zero(p.size());
  for (int i = 1; i < p.size(); ++i) out[i - 1] = i * p[i];
  return out;
}

/* Monomial expansions of the shifted Chebyshev basis psi_0..psi_K. */
std::vector<Vec> shifted_cheb_monomials(int order) {
  std::vector<Vec> psi(order + 1, Vec::Zero(order + 1));
  psi[0][0] = 1.0;
  if (order >= 1) {
    psi[1][0] = -1.0;
    psi[1][1] = 2.0;
  }
  Vec two_t = Vec::Zero(order + 1);  // 2(2x-1)
  two_t[0] = -2.0;
  if (order >= 1) two_t[1] = 4.0;
  for (int k = 2; k <= order; ++k)
    psi[k] = poly_mul(two_t, psi[k - 1], order) - psi[k - 2];
  return psi;
}

}  // namespace

double ChebyshevPotential::log_eval(double x) const {
  double v = cheb_eval(coeffs, x);
  return v > 0 ? std::log(v) : kNegInf;
}

WFKernel WFKernel::make(double mut0, double mut1, int order, double tau, int steps) {
  if (mut0 <= 0 || mut1 <= 0)
    throw ValidationError("wf kernel: mutation rates must be positive");
  if (order < 1) throw ValidationError("wf kernel: basis order must be at least 1");
  if (tau <= 0) throw ValidationError("wf kernel: edge length must be positive");
  WFKernel k;
  k.mut0 = mut0;
  k.mut1 = mut1;
  k.order = order;
  k.tau = tau;
  k.steps = steps;
  return k;
}

int WFKernel::grid_steps() const {
  if (steps > 0) return steps;
  return static_cast<int>(std::ceil(tau / kDefaultMaxStep));
}

Vec cheb_lobatto_points(int order) {
  Vec x(order + 1);
  for (int j = 0; j <= order; ++j) x[j] = 0.5 * (std::cos(M_PI * j / order) + 1.0);
  return x;
}

Vec cheb_coeffs_to_values(const Vec& coeffs) {
  int order = static_cast<int>(coeffs.size()) - 1;
  Vec v = Vec::Zero(order + 1);
  for (int j = 0; j <= order; ++j)
    for (int k = 0; k <= order; ++k) v[j] += coeffs[k] * std::cos(M_PI * k * j / order);
  return v;
}

Vec cheb_values_to_coeffs(const Vec& values) {
  int order = static_cast<int>(values.size()) - 1;
  Vec c = Vec::Zero(order + 1);
  for (int k = 0; k <= order; ++k) {
    double s = 0;
    for (int j = 0; j <= order; ++j) {
      double gj = (j == 0 || j == order) ? 0.5 : 1.0;
      s += gj * values[j] * std::cos(M_PI * k * j / order);
    }
    double gk = (k == 0 || k == order) ? 0.5 : 1.0;
    c[k] = 2.0 * gk * s / order;
  }
  return c;
}

double cheb_eval(const Vec& coeffs, double x) {
  // Clenshaw recurrence in t = 2x-1
  double t = 2.0 * x - 1.0;
  double b1 = 0, b2 = 0;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k) {
    double b0 = 2.0 * t * b1 - b2 + coeffs[k];
    b2 = b1;
    b1 = b0;
  }
  return t * b1 - b2 + coeffs[0];
}

double cheb_eval_deriv(const Vec& coeffs, double x) {
  // d/dx T_k(2x-1) = 2k U_{k-1}(2x-1); Clenshaw for the U series
  double t = 2.0 * x - 1.0;
  double b1 = 0, b2 = 0;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k) {
    double b0 = 2.0 * t * b1 - b2 + 2.0 * k * coeffs[k];
    b2 = b1;
    b1 = b0;
  }
  return b1;  // U_0 = 1
}

Mat wf_generator_matrix(double mut0, double mut1, int order) {
  std::vector<Vec> psi = shifted_cheb_monomials(order);
  Vec bpoly = Vec::Zero(order + 1);  // mut0 (1-x) + mut1 x
  bpoly[0] = mut0;
  if (order >= 1) bpoly[1] = mut1 - mut0;
  Vec apoly = Vec::Zero(order + 1);  // x (1-x)
  if (order >= 1) apoly[1] = 1.0;
  if (order >= 2) apoly[2] = -1.0;

  // leading monomial coefficients of psi_k: 1, then 2^(2k-1)
  std::vector<double> lead(order + 1, 1.0);
  for (int k = 1; k <= order; ++k) lead[k] = std::pow(2.0, 2 * k - 1);

  Mat q = Mat::Zero(order + 1, order + 1);
  for (int k = 0; k <= order; ++k) {
    Vec image = poly_mul(bpoly, poly_deriv(psi[k]), order) +
                0.5 * poly_mul(apoly, poly_deriv(poly_deriv(psi[k])), order);
    // back-substitute highest degree first; image has degree <= k, so the
    // column is upper triangular by construction
    Vec residual = image;
    for (int j = order; j >= 0; --j) {
      double c = residual[j] / lead[j];
      if (c != 0.0) {
        q(j, k) = c;
        residual -= c * psi[j];
      }
    }
  }
  return q;
}

WFBackward wf_solve_backward(const WFKernel& k, const ChebyshevPotential& terminal) {
  if (terminal.order() != k.order)
    throw ValidationError("wf_solve_backward: potential order does not match the edge");
  Mat q = wf_generator_matrix(k.mut0, k.mut1, k.order);
  const int m = k.grid_steps();
  const double h = k.tau / m;
  WFBackward out;
  out.times.resize(m + 1);
  out.coeffs.resize(m + 1);
  for (int i = 0; i <= m; ++i) out.times[i] = k.tau * i / m;
  Vec lam = terminal.coeffs;
  out.coeffs[m] = lam;
  for (int i = m; i > 0; --i) {
    // d lambda / du = -q lambda, integrated backward with RK4
    Vec k1 = -(q * lam);
    Vec k2 = -(q * (lam - 0.5 * h * k1));
    Vec k3 = -(q * (lam - 0.5 * h * k2));
    Vec k4 = -(q * (lam - h * k3));
    lam -= h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!lam.allFinite())
      throw NumericError("wf_solve_backward: coefficient flow became non-finite");
    out.coeffs[i - 1] = lam;
  }
  return out;
}

ChebyshevPotential wf_message(const WFBackward& b) { return {b.coeffs[0]}; }

ChebyshevPotential cheb_fuse(const ChebyshevPotential& a, const ChebyshevPotential& b) {
  if (a.order() != b.order()) throw ValidationError("cheb_fuse: basis order mismatch");
  Vec va = cheb_coeffs_to_values(a.coeffs);
  Vec vb = cheb_coeffs_to_values(b.coeffs);
  return {cheb_values_to_coeffs((va.array() * vb.array()).matrix())};
}

ChebyshevPotential wf_leaf_message(const BinomialObsKernel& k, int obs) {
  if (obs < 0 || obs > k.trials)
    throw ValidationError("wf_leaf_message: observed count out of range");
  if (k.order < k.trials)
    throw ValidationError(
        "wf_leaf_message: basis order below the leaf binomial degree; the "
        "polynomial projection would be inexact");
  Vec x = cheb_lobatto_points(k.order);
  Vec v(k.order + 1);
  for (int j = 0; j <= k.order; ++j) {
    double lp = log_binom_pmf(obs, k.trials, std::min(1.0, std::max(0.0, x[j])));
    v[j] = lp == kNegInf ? 0.0 : std::exp(lp);
  }
  return {cheb_values_to_coeffs(v)};
}

double wf_leaf_log_weight(const BinomialObsKernel& k, int obs, const ChebyshevPotential& message,
                          double x) {
  double num = log_binom_pmf(obs, k.trials, std::min(1.0, std::max(0.0, x)));
  return num - message.log_eval(x);
}

static WFPath wf_simulate_impl(const WFKernel& k, const WFBackward& b, double x0,
                               const std::vector<double>* given, Rng* rng) {
  const int m = k.grid_steps();
  if (static_cast<int>(b.times.size()) != m + 1)
    throw ValidationError("wf_guided_simulate: backward grid mismatch");
  if (x0 < 0 || x0 > 1) throw ValidationError("wf_guided_simulate: start outside [0,1]");
  WFPath path;
  path.times = b.times;
  path.states.resize(m + 1);
  path.innovations.resize(m);
  path.states[0] = std::min(1.0 - k.clamp_eps, std::max(k.clamp_eps, x0));
  for (int i = 0; i < m; ++i) {
    double dt = b.times[i + 1] - b.times[i];
    double x = path.states[i];
    double z = given ? (*given)[i] : draw_normal(*rng);
    path.innovations[i] = z;
    double g = cheb_eval(b.coeffs[i], x);
    if (g <= 0)
      throw NumericError("wf_guided_simulate: potential not positive at the current state");
    double a = x * (1.0 - x);
    double drift = k.mut0 * (1.0 - x) + k.mut1 * x + a * cheb_eval_deriv(b.coeffs[i], x) / g;
    double next = x + drift * dt + std::sqrt(a * dt) * z;
    path.states[i + 1] = std::min(1.0 - k.clamp_eps, std::max(k.clamp_eps, next));
  }
  return path;
}

WFPath wf_guided_simulate(const WFKernel& k, const WFBackward& b, double x0, Rng& rng) {
  return wf_simulate_impl(k, b, x0, nullptr, &rng);
}

WFPath wf_guided_simulate_reparam(const WFKernel& k, const WFBackward& b, double x0,
                                  const std::vector<double>& innovations) {
  if (static_cast<int>(innovations.size()) != k.grid_steps())
    throw ValidationError("wf_guided_simulate: innovation count mismatch");
  return wf_simulate_impl(k, b, x0, &innovations, nullptr);
}

}  // namespace bffg
