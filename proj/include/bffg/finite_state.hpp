#pragma once

#include <functional>

#include "bffg/potential.hpp"
#include "bffg/random.hpp"

namespace bffg {

/* Transition kernel on a finite state space.  trans rows are probability
 * vectors over the target space; aux_trans is the comparison kernel driving
 * the backward pass (equal to trans unless the model substitutes a tractable
 * surrogate).  Matrices may be rectangular when source and target spaces
 * differ. */
struct FiniteKernel {
  Mat trans;
  Mat aux_trans;

  static FiniteKernel matched(const Mat& k);
  static FiniteKernel with_aux(const Mat& k, const Mat& aux);
  int from_states() const { return static_cast<int>(trans.rows()); }
  int to_states() const { return static_cast<int>(trans.cols()); }
};

/* log of (row x of k) . exp(log_g), skipping structural zeros. */
double log_row_dot(const Mat& k, int x, const Vec& log_g);

/* Backward transport: out_i = log sum_j aux(i,j) exp(g_j).  Zero kernel
 * entries are skipped, so sparse comparison kernels cost O(nnz). */
VectorPotential fs_pullback(const FiniteKernel& k, const VectorPotential& g);

VectorPotential fs_fuse(const VectorPotential& a, const VectorPotential& b);

/* Potential of an exactly observed state: log e_k. */
VectorPotential fs_unit(int k, int size);

/* Message on a leaf edge: column k of the comparison kernel viewed as a
 * function of the parent state (the backward transport of e_k). */
VectorPotential fs_leaf_message(const FiniteKernel& k, int obs);

/* Guided transition pmf out of x: proportional to trans(x, .) * exp(g). */
Vec fs_guided_pmf(const FiniteKernel& k, const VectorPotential& g, int x);

int fs_guided_sample(const FiniteKernel& k, const VectorPotential& g, int x, Rng& rng);

double fs_log_weight(const FiniteKernel& k, const VectorPotential& g,
                     const VectorPotential& message, int x);

double fs_leaf_log_weight(const FiniteKernel& k, int obs, const VectorPotential& message, int x);

/* Interacting particle system: n particles, each on its own finite space of
 * size `states`.  The forward kernel factorizes over particles given the full
 * previous configuration; the comparison kernels are state-independent by
 * construction (they are plain matrices), which is what keeps the backward
 * pass factorized. */
struct ParticleKernel {
  int particles = 0;
  int states = 0;
  std::function<Mat(int, const std::vector<int>&)> trans;  // K_i(x): row x_i used
  std::vector<Mat> aux_trans;
};

/* Per-particle emission on a leaf edge. */
struct ParticleObsKernel {
  std::vector<Mat> emission;
  std::vector<Mat> aux_emission;  // defaults to emission

  static ParticleObsKernel matched(std::vector<Mat> e);
};

ParticlePotential particle_pullback(const ParticleKernel& k, const ParticlePotential& g);

ParticlePotential particle_fuse(const ParticlePotential& a, const ParticlePotential& b);

ParticlePotential particle_leaf_message(const ParticleObsKernel& k, const std::vector<int>& obs);

std::vector<int> particle_guided_sample(const ParticleKernel& k, const ParticlePotential& g,
                                        const std::vector<int>& x, Rng& rng);

double particle_log_weight(const ParticleKernel& k, const ParticlePotential& g,
                           const ParticlePotential& message, const std::vector<int>& x);

double particle_leaf_log_weight(const ParticleObsKernel& k, const std::vector<int>& obs,
                                const ParticlePotential& message, const std::vector<int>& x);

}  // namespace bffg
