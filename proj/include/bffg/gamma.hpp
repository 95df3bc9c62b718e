#pragma once

#include <functional>

#include "bffg/potential.hpp"
#include "bffg/random.hpp"

namespace bffg {

/* Increasing-increment edge: y - x ~ Gamma(shape, rate(x)).  The comparison
 * kernel uses the constant rate aux_rate, which keeps the backward potentials
 * inside the Gamma family.  Branching is not supported for this family: the
 * product of two Gamma potentials with one anchor each leaves the family, so
 * fusing throws and model validation rejects such graphs up front. */
struct GammaKernel {
  double shape = 1.0;
  std::function<double(double)> rate;
  double aux_rate = 1.0;

  static GammaKernel matched(double shape, double rate);
  static GammaKernel state_rate(double shape, std::function<double(double)> rate,
                                double aux_rate);
};

enum class GammaWeightMethod { Quadrature, MonteCarlo };

/* Exact within the family: shape accumulates, rate and anchor are carried. */
GammaPotential gamma_pullback(const GammaKernel& k, const GammaPotential& g);

/* Deliberately unsupported; always throws. */
GammaPotential gamma_fuse(const GammaPotential& a, const GammaPotential& b);

GammaPotential gamma_leaf_message(const GammaKernel& k, double obs);

/* Draw from the exponentially tilted Beta density
 *   f(z) ~ z^(g1-1) (1-z)^(g2-1) exp(-lambda z) on (0,1)
 * by rejection from Beta(g1, g2) with envelope max(1, exp(-lambda)). */
double expbeta_sample(Rng& rng, double g1, double g2, double lambda);

/* Guided increment toward the anchor of g: y = x + Z (anchor - x). */
double gamma_guided_sample(const GammaKernel& k, const GammaPotential& g, double x, Rng& rng);

/* Closed-form weight ratio; the expectation over Beta(shape, g.shape) is
 * evaluated by a 32-node Gauss-Jacobi rule unless the caller asks for the
 * Monte Carlo route. */
double gamma_log_weight(const GammaKernel& k, const GammaPotential& g, double x,
                        GammaWeightMethod method = GammaWeightMethod::Quadrature,
                        Rng* rng = nullptr, int mc_samples = 4096);

double gamma_leaf_log_weight(const GammaKernel& k, double obs, const GammaPotential& message,
                             double x);

}  // namespace bffg
