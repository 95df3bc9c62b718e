#pragma once

#include <vector>

#include "bffg/potential.hpp"
#include "bffg/random.hpp"

namespace bffg {

/* Wright-Fisher diffusion edge on [0,1]:
 *   dX = (mut0 (1-X) + mut1 X) du + sqrt(X(1-X)) dW
 * guided through polynomial potentials in the shifted Chebyshev basis
 * T_k(2x-1), k = 0..order.  The generator maps the basis into itself (the
 * matrix is upper triangular), so with order at least the leaf binomial
 * degree the backward potential solves the Kolmogorov equation exactly and
 * the edge weight vanishes identically. */
struct WFKernel {
  double mut0 = 0;
  double mut1 = 0;
  int order = 0;
  double tau = 1.0;
  int steps = 0;  // shared RK4/Euler grid; 0 = derive from max step 1e-3
  double clamp_eps = 1e-6;

  static WFKernel make(double mut0, double mut1, int order, double tau, int steps = 0);
  int grid_steps() const;
};

/* Leaf edge: observed count ~ Binomial(trials, x).  order must match (and be
 * at least) the basis order of the edge feeding the parent vertex. */
struct BinomialObsKernel {
  int trials = 0;
  int order = 0;
};

/* Chebyshev-Lobatto points on [0,1], j = 0..order (descending). */
Vec cheb_lobatto_points(int order);

/* O(K^2) transforms between basis coefficients and values at the Lobatto
 * points; exact (up to rounding) for polynomials of degree <= order. */
Vec cheb_coeffs_to_values(const Vec& coeffs);
Vec cheb_values_to_coeffs(const Vec& values);

double cheb_eval(const Vec& coeffs, double x);
double cheb_eval_deriv(const Vec& coeffs, double x);

/* Matrix of the generator on the basis: column k holds the coefficients of
 * b psi_k' + a psi_k'' / 2.  Built by exact polynomial arithmetic in the
 * monomial basis and converted by leading-coefficient back-substitution;
 * strictly upper triangular plus diagonal by construction. */
Mat wf_generator_matrix(double mut0, double mut1, int order);

struct WFBackward {
  std::vector<double> times;
  std::vector<Vec> coeffs;  // basis coefficients of g(u, .) per grid node
};

WFBackward wf_solve_backward(const WFKernel& k, const ChebyshevPotential& terminal);

ChebyshevPotential wf_message(const WFBackward& b);

/* Pointwise product at the Lobatto points, interpolated back into the basis. */
ChebyshevPotential cheb_fuse(const ChebyshevPotential& a, const ChebyshevPotential& b);

ChebyshevPotential wf_leaf_message(const BinomialObsKernel& k, int obs);

/* Leaf edge: exact binomial log-pmf minus the message value; zero up to
 * rounding because the message is the same polynomial. */
double wf_leaf_log_weight(const BinomialObsKernel& k, int obs, const ChebyshevPotential& message,
                          double x);

struct WFPath {
  std::vector<double> times;
  std::vector<double> states;
  std::vector<double> innovations;
};

WFPath wf_guided_simulate(const WFKernel& k, const WFBackward& b, double x0, Rng& rng);

WFPath wf_guided_simulate_reparam(const WFKernel& k, const WFBackward& b, double x0,
                                  const std::vector<double>& innovations);

}  // namespace bffg
