#pragma once

#include <cstdint>
#include <random>

#include "bffg/numeric.hpp"

namespace bffg {

using Rng = std::mt19937_64;

/* splitmix64 step; used to derive independent seeds for per-edge and
 * per-replicate streams so that runs are reproducible regardless of the
 * order in which edges consume randomness. */
inline std::uint64_t split_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t edge_id,
                                 std::uint64_t replicate = 0) {
  std::uint64_t s = split_mix(run_seed ^ 0x517cc1b727220a95ULL);
  s = split_mix(s ^ split_mix(edge_id + 1));
  s = split_mix(s ^ split_mix(replicate + 1));
  return s;
}

inline Rng make_rng(std::uint64_t run_seed, std::uint64_t edge_id, std::uint64_t replicate = 0) {
  return Rng(derive_seed(run_seed, edge_id, replicate));
}

inline double draw_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double draw_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double draw_gamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

inline double draw_beta(Rng& rng, double a, double b) {
  double x = draw_gamma(rng, a, 1.0);
  double y = draw_gamma(rng, b, 1.0);
  return x / (x + y);
}

inline double draw_exponential(Rng& rng, double rate) {
  return std::exponential_distribution<double>(rate)(rng);
}

/* Categorical draw from unnormalized non-negative weights. */
inline int draw_categorical(Rng& rng, const Vec& weights) {
  double total = 0;
  for (int i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0 || !std::isfinite(weights[i]))
      throw NumericError("draw_categorical: invalid weight");
    total += weights[i];
  }
  if (total <= 0) throw NumericError("draw_categorical: all weights zero");
  double u = draw_uniform(rng) * total;
  double acc = 0;
  for (int i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u <= acc) return i;
  }
  return static_cast<int>(weights.size()) - 1;
}

/* Categorical draw from log-weights (may contain -inf). */
inline int draw_categorical_log(Rng& rng, const Vec& log_weights) {
  double m = kNegInf;
  for (int i = 0; i < log_weights.size(); ++i) m = std::max(m, log_weights[i]);
  if (m == kNegInf) throw NumericError("draw_categorical_log: all states impossible");
  Vec w(log_weights.size());
  for (int i = 0; i < log_weights.size(); ++i)
    w[i] = log_weights[i] == kNegInf ? 0.0 : std::exp(log_weights[i] - m);
  return draw_categorical(rng, w);
}

}  // namespace bffg
