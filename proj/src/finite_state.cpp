#include "bffg/finite_state.hpp"

namespace bffg {

namespace {

void check_rows_stochastic(const Mat& k, const char* what) {
  for (int i = 0; i < k.rows(); ++i) {
    double s = 0;
    for (int j = 0; j < k.cols(); ++j) {
      if (k(i, j) < 0) throw ValidationError(std::string(what) + ": negative entry");
      s += k(i, j);
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw ValidationError(std::string(what) + ": row " + std::to_string(i) +
                            " does not sum to 1");
  }
}

Vec pullback_rows(const Mat& aux, const Vec& log_g) {
  if (aux.cols() != log_g.size())
    throw ValidationError("fs_pullback: potential size does not match kernel");
  Vec out(aux.rows());
  for (int i = 0; i < aux.rows(); ++i) out[i] = log_row_dot(aux, i, log_g);
  return out;
}

}  // namespace

double log_row_dot(const Mat& k, int x, const Vec& log_g) {
  double best = kNegInf;
  for (int j = 0; j < k.cols(); ++j) {
    if (k(x, j) == 0.0 || log_g[j] == kNegInf) continue;
    best = std::max(best, std::log(k(x, j)) + log_g[j]);
  }
  if (best == kNegInf) return kNegInf;
  double s = 0;
  for (int j = 0; j < k.cols(); ++j) {
    if (k(x, j) == 0.0 || log_g[j] == kNegInf) continue;
    s += std::exp(std::log(k(x, j)) + log_g[j] - best);
  }
  return best + std::log(s);
}

FiniteKernel FiniteKernel::matched(const Mat& k) { return with_aux(k, k); }

FiniteKernel FiniteKernel::with_aux(const Mat& k, const Mat& aux) {
  check_rows_stochastic(k, "finite kernel");
  if (aux.rows() != k.rows() || aux.cols() != k.cols())
    throw ValidationError("finite kernel: comparison kernel shape mismatch");
  for (int i = 0; i < aux.rows(); ++i)
    for (int j = 0; j < aux.cols(); ++j)
      if (aux(i, j) < 0) throw ValidationError("finite kernel: negative comparison entry");
  return {k, aux};
}

VectorPotential fs_pullback(const FiniteKernel& k, const VectorPotential& g) {
  return {pullback_rows(k.aux_trans, g.log_values)};
}

VectorPotential fs_fuse(const VectorPotential& a, const VectorPotential& b) {
  if (a.size() != b.size()) throw ValidationError("fs_fuse: size mismatch");
  return {a.log_values + b.log_values};
}

VectorPotential fs_unit(int k, int size) {
  if (k < 0 || k >= size) throw ValidationError("fs_unit: state out of range");
  Vec v = Vec::Constant(size, kNegInf);
  v[k] = 0.0;
  return {v};
}

VectorPotential fs_leaf_message(const FiniteKernel& k, int obs) {
  if (obs < 0 || obs >= k.to_states())
    throw ValidationError("fs_leaf_message: observation out of range");
  Vec out(k.from_states());
  for (int i = 0; i < k.from_states(); ++i) {
    double e = k.aux_trans(i, obs);
    out[i] = e > 0 ? std::log(e) : kNegInf;
  }
  return {out};
}

Vec fs_guided_pmf(const FiniteKernel& k, const VectorPotential& g, int x) {
  if (g.size() != k.to_states())
    throw ValidationError("fs_guided_pmf: potential size mismatch");
  if (x < 0 || x >= k.from_states())
    throw ValidationError("fs_guided_pmf: state out of range");
  Vec w(k.to_states());
  double norm = log_row_dot(k.trans, x, g.log_values);
  if (norm == kNegInf)
    throw NumericError("fs_guided_pmf: no reachable state has positive potential");
  for (int j = 0; j < k.to_states(); ++j) {
    double lw = (k.trans(x, j) == 0.0 || g.log_values[j] == kNegInf)
                    ? kNegInf
                    : std::log(k.trans(x, j)) + g.log_values[j] - norm;
    w[j] = lw == kNegInf ? 0.0 : std::exp(lw);
  }
  return w;
}

int fs_guided_sample(const FiniteKernel& k, const VectorPotential& g, int x, Rng& rng) {
  return draw_categorical(rng, fs_guided_pmf(k, g, x));
}

double fs_log_weight(const FiniteKernel& k, const VectorPotential& g,
                     const VectorPotential& message, int x) {
  return log_row_dot(k.trans, x, g.log_values) - message.log_values[x];
}

double fs_leaf_log_weight(const FiniteKernel& k, int obs, const VectorPotential& message,
                          int x) {
  double p = k.trans(x, obs);
  double num = p > 0 ? std::log(p) : kNegInf;
  if (num == kNegInf && message.log_values[x] == kNegInf)
    throw NumericError("fs_leaf_log_weight: observation impossible from sampled state");
  return num - message.log_values[x];
}

ParticleObsKernel ParticleObsKernel::matched(std::vector<Mat> e) {
  ParticleObsKernel k;
  k.emission = e;
  k.aux_emission = std::move(e);
  return k;
}

ParticlePotential particle_pullback(const ParticleKernel& k, const ParticlePotential& g) {
  if (g.particles() != k.particles)
    throw ValidationError("particle_pullback: particle count mismatch");
  ParticlePotential out;
  out.log_values.reserve(k.particles);
  for (int i = 0; i < k.particles; ++i)
    out.log_values.push_back(pullback_rows(k.aux_trans[i], g.log_values[i]));
  return out;
}

ParticlePotential particle_fuse(const ParticlePotential& a, const ParticlePotential& b) {
  if (a.particles() != b.particles())
    throw ValidationError("particle_fuse: particle count mismatch");
  ParticlePotential out = a;
  for (int i = 0; i < b.particles(); ++i) {
    if (out.log_values[i].size() != b.log_values[i].size())
      throw ValidationError("particle_fuse: state space mismatch");
    out.log_values[i] += b.log_values[i];
  }
  return out;
}

ParticlePotential particle_leaf_message(const ParticleObsKernel& k,
                                        const std::vector<int>& obs) {
  if (obs.size() != k.emission.size())
    throw ValidationError("particle_leaf_message: observation length mismatch");
  ParticlePotential out;
  for (size_t i = 0; i < k.emission.size(); ++i) {
    const Mat& e = k.aux_emission[i];
    Vec col(e.rows());
    for (int s = 0; s < e.rows(); ++s)
      col[s] = e(s, obs[i]) > 0 ? std::log(e(s, obs[i])) : kNegInf;
    out.log_values.push_back(col);
  }
  return out;
}

std::vector<int> particle_guided_sample(const ParticleKernel& k, const ParticlePotential& g,
                                        const std::vector<int>& x, Rng& rng) {
  if (static_cast<int>(x.size()) != k.particles)
    throw ValidationError("particle_guided_sample: configuration length mismatch");
  std::vector<int> y(k.particles);
  for (int i = 0; i < k.particles; ++i) {
    Mat ki = k.trans(i, x);
    Vec lw(ki.cols());
    for (int j = 0; j < ki.cols(); ++j)
      lw[j] = ki(x[i], j) == 0.0 || g.log_values[i][j] == kNegInf
                  ? kNegInf
                  : std::log(ki(x[i], j)) + g.log_values[i][j];
    y[i] = draw_categorical_log(rng, lw);
  }
  return y;
}

double particle_log_weight(const ParticleKernel& k, const ParticlePotential& g,
                           const ParticlePotential& message, const std::vector<int>& x) {
  double total = 0;
  for (int i = 0; i < k.particles; ++i) {
    Mat ki = k.trans(i, x);
    total += log_row_dot(ki, x[i], g.log_values[i]) - message.log_values[i][x[i]];
  }
  return total;
}

double particle_leaf_log_weight(const ParticleObsKernel& k, const std::vector<int>& obs,
                                const ParticlePotential& message, const std::vector<int>& x) {
  double total = 0;
  for (size_t i = 0; i < k.emission.size(); ++i) {
    double p = k.emission[i](x[i], obs[i]);
    total += (p > 0 ? std::log(p) : kNegInf) - message.log_values[i][x[i]];
  }
  return total;
}

}  // namespace bffg
