#pragma once

#include <functional>

#include "bffg/potential.hpp"
#include "bffg/random.hpp"

namespace bffg {

/* Transition y | x ~ N(mean(x), cov(x)) paired with the linear-Gaussian
 * comparison kernel y | x ~ N(aux_lin x + aux_shift, aux_cov) used by the
 * backward pass.  For a linear edge the two coincide. */
struct GaussianKernel {
  int dim_in = 0;
  int dim_out = 0;
  std::function<Vec(const Vec&)> mean;
  std::function<Mat(const Vec&)> cov;
  Mat aux_lin;
  Vec aux_shift;
  Mat aux_cov;
  bool forward_linear = false;

  static GaussianKernel linear(const Mat& lin, const Vec& shift, const Mat& cov);
  static GaussianKernel nonlinear(std::function<Vec(const Vec&)> mean,
                                  std::function<Mat(const Vec&)> cov, const Mat& aux_lin,
                                  const Vec& aux_shift, const Mat& aux_cov);
};

/* log of integral g(y) N(y; m, S) dy for an exponential-quadratic g.  Picks
 * between a direct Cholesky route and an inversion-avoiding route when the
 * quadratic coefficient of g is singular or badly conditioned. */
double log_gauss_integral(const GaussianPotential& g, const Vec& m, const Mat& S);

/* Backward transport of g through the comparison kernel; exact within the
 * family, normalization tracked in log_scale. */
GaussianPotential gauss_pullback(const GaussianKernel& k, const GaussianPotential& g);

GaussianPotential gauss_fuse(const GaussianPotential& a, const GaussianPotential& b);

/* Message on a leaf edge with observation obs, built from the comparison
 * kernel parameters; equals the emission density as a function of the parent
 * state when the edge is linear. */
GaussianPotential gauss_leaf_message(const GaussianKernel& k, const Vec& obs);

/* Draw from the guided transition kernel out of parent state x toward the
 * fused child potential g. */
Vec gauss_guided_sample(const GaussianKernel& k, const GaussianPotential& g, const Vec& x,
                        Rng& rng);

/* Deterministic variant: z is a standard normal vector of length dim_out. */
Vec gauss_guided_sample_reparam(const GaussianKernel& k, const GaussianPotential& g,
                                const Vec& x, const Vec& z);

/* log of (forward kernel applied to g)(x) / message(x); message must be the
 * backward transport of g along this edge. */
double gauss_log_weight(const GaussianKernel& k, const GaussianPotential& g,
                        const GaussianPotential& message, const Vec& x);

/* Leaf-edge weight: exact emission density in the numerator, message value in
 * the denominator. */
double gauss_leaf_log_weight(const GaussianKernel& k, const Vec& obs,
                             const GaussianPotential& message, const Vec& x);

}  // namespace bffg
