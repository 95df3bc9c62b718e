#pragma once

#include <functional>

#include "bffg/potential.hpp"
#include "bffg/random.hpp"

namespace bffg {

/* Diffusion edge dX = drift(u,X) du + dispersion(u,X) dW on [0, tau], guided
 * against the linear comparison process dX~ = (aux_drift_lin(u) X~ +
 * aux_drift_shift(u)) du + aux_dispersion(u) dW.  The backward pass solves
 * matrix ODEs for the exponential-quadratic potential along the edge; the
 * forward pass runs Euler-Maruyama on the same grid and keeps its standard
 * normal innovations so a path can be replayed deterministically. */
struct SDEKernel {
  int dim = 0;
  int wdim = 0;
  std::function<Vec(double, const Vec&)> drift;
  std::function<Mat(double, const Vec&)> dispersion;
  std::function<Mat(double)> aux_drift_lin;
  std::function<Vec(double)> aux_drift_shift;
  std::function<Mat(double)> aux_dispersion;
  double tau = 1.0;
  int steps = 0;  // 0 = derive from the default maximum step size
  bool forward_is_aux = false;

  static SDEKernel linear(const Mat& lin, const Vec& shift, const Mat& disp, double tau,
                          int steps = 0);
  static SDEKernel nonlinear(std::function<Vec(double, const Vec&)> drift,
                             std::function<Mat(double, const Vec&)> dispersion,
                             const Mat& aux_lin, const Vec& aux_shift, const Mat& aux_disp,
                             double tau, int steps = 0);
  int grid_steps() const;
};

/* Backward potential along the edge, stored at every grid node:
 *   log g(u, x) = log_scale[k] + info_vec[k] . x - x' info_mat[k] x / 2
 * with times ascending from 0 to tau. */
struct SDEBackward {
  std::vector<double> times;
  std::vector<double> log_scale;
  std::vector<Vec> info_vec;
  std::vector<Mat> info_mat;

  GaussianPotential at(int k) const { return {log_scale[k], info_vec[k], info_mat[k]}; }
};

SDEBackward sde_solve_backward(const SDEKernel& k, const GaussianPotential& terminal);

/* The edge message: the backward potential evaluated at time zero. */
GaussianPotential sde_message(const SDEBackward& b);

struct SDEPath {
  std::vector<double> times;
  std::vector<Vec> states;       // grid_steps()+1 entries
  std::vector<Vec> innovations;  // grid_steps() standard normal vectors
};

SDEPath sde_guided_simulate(const SDEKernel& k, const SDEBackward& b, const Vec& x0, Rng& rng);

SDEPath sde_guided_simulate_reparam(const SDEKernel& k, const SDEBackward& b, const Vec& x0,
                                    const std::vector<Vec>& innovations);

/* Left-endpoint Riemann sum of the local drift/dispersion mismatch along the
 * simulated path; identically the log of the edge weight. */
double sde_log_weight(const SDEKernel& k, const SDEBackward& b, const SDEPath& path);

}  // namespace bffg
