#pragma once

#include <variant>
#include <vector>

#include "bffg/numeric.hpp"

namespace bffg {

/* A vertex state.  Which alternative is live depends on the edge family:
 *   int               - finite state space / Markov jump chain
 *   double            - scalar diffusion (subordinator, Wright-Fisher)
 *   Vec               - Gaussian / diffusion in R^d
 *   std::vector<int>  - configuration of an interacting particle system
 */
using State = std::variant<int, double, Vec, std::vector<int>>;

/* Likelihood potential in exponential-quadratic form:
 *   log g(y) = log_scale + info_vec . y - y' info_mat y / 2
 * Closed under the Gaussian backward operations; log_scale carries the
 * normalization explicitly so that root values are true densities. */
struct GaussianPotential {
  double log_scale = 0.0;
  Vec info_vec;
  Mat info_mat;

  int dim() const { return static_cast<int>(info_vec.size()); }
  double log_eval(const Vec& y) const {
    return log_scale + info_vec.dot(y) - 0.5 * y.dot(info_mat * y);
  }
};

/* Potential on a finite state space, stored as log-values (-inf encodes an
 * impossible state). */
struct VectorPotential {
  Vec log_values;

  int size() const { return static_cast<int>(log_values.size()); }
  double log_eval(int k) const { return log_values[k]; }
};

/* Potential over infection counts 0..N for the agent epidemic family; the
 * potential depends on a configuration only through its count. */
struct CountPotential {
  Vec log_values;  // index = number of infected agents

  int max_count() const { return static_cast<int>(log_values.size()) - 1; }
  double log_eval_count(int count) const { return log_values[count]; }
};

/* Potential for increasing subordinator edges:
 *   g(y) = GammaDensity(anchor - y; shape, rate)   for y < anchor, else 0.
 * anchor is the observed terminal value the backward pass propagates. */
struct GammaPotential {
  double shape = 1.0;
  double rate = 1.0;
  double anchor = 0.0;

  double log_eval(double y) const { return log_gamma_pdf(anchor - y, shape, rate); }
};

/* Potential for Wright-Fisher edges: a polynomial on [0,1] held by its
 * coefficients in the shifted Chebyshev basis T_k(2x-1), k = 0..K. */
struct ChebyshevPotential {
  Vec coeffs;

  int order() const { return static_cast<int>(coeffs.size()) - 1; }
  double log_eval(double x) const;  // Clenshaw; defined in chebyshev.cpp
};

/* Factorized potential for an interacting particle system: one finite-state
 * potential per particle.  Storage is n * R values; the joint product space
 * is never materialized. */
struct ParticlePotential {
  std::vector<Vec> log_values;  // log_values[i][k], particle i in state k

  int particles() const { return static_cast<int>(log_values.size()); }
  double log_eval(const std::vector<int>& config) const {
    double s = 0;
    for (size_t i = 0; i < log_values.size(); ++i) s += log_values[i][config[i]];
    return s;
  }
};

using Potential = std::variant<GaussianPotential, VectorPotential, CountPotential,
                               GammaPotential, ChebyshevPotential, ParticlePotential>;

const char* potential_family_name(const Potential& p);

/* Evaluate log g at a state; throws ValidationError if the state alternative
 * does not match the potential family. */
double potential_log_eval(const Potential& p, const State& x);

}  // namespace bffg
