#pragma once

#include <vector>

#include "bffg/potential.hpp"
#include "bffg/random.hpp"

namespace bffg {

/* Transition kernel whose source is the joint configuration of several finite
 * parents.  Rows of trans/aux_trans are indexed by the mixed-radix encoding of
 * the parent tuple (first parent varies slowest). */
struct FiniteJointKernel {
  std::vector<int> parent_cards;
  Mat trans;      // joint_size x states
  Mat aux_trans;  // same shape, drives the backward pass

  static FiniteJointKernel matched(std::vector<int> cards, const Mat& k);
  static FiniteJointKernel with_aux(std::vector<int> cards, const Mat& k, const Mat& aux);
  int joint_size() const { return static_cast<int>(trans.rows()); }
  int to_states() const { return static_cast<int>(trans.cols()); }
};

int joint_size(const std::vector<int>& cards);
int joint_index(const std::vector<int>& cards, const std::vector<int>& config);
std::vector<int> joint_config(const std::vector<int>& cards, int index);

/* Backward transport of the child potential through the comparison kernel,
 * yielding a potential on the joint parent configuration space. */
VectorPotential dag_joint_pullback(const FiniteJointKernel& k, const VectorPotential& g);

/* Split a joint-configuration potential into one factor per parent, so each
 * factor can be fused into that parent's own backward recursion.  Factor u at
 * state s is the conditional expectation of the joint potential given
 * X_u = s under the reference distribution pi over configurations.  States
 * with zero pi-mass fall back to the unconditional mean, which keeps forward
 * weights finite; any positive choice there leaves the estimator unbiased.
 * With a single parent the joint potential is returned unchanged, so the
 * one-parent case reproduces the chain rule exactly. */
std::vector<VectorPotential> dag_factorize(const std::vector<int>& cards,
                                           const VectorPotential& joint, const Vec& pi);

/* Guided child draw given realized parent states: pmf proportional to
 * trans(joint_index, .) * exp(g). */
int dag_guided_sample(const FiniteJointKernel& k, const VectorPotential& g,
                      const std::vector<int>& parent_states, Rng& rng);

/* Edge weight: log of the guided normalizer under the true kernel minus the
 * sum of the per-parent factors at the realized states. */
double dag_log_weight(const FiniteJointKernel& k, const VectorPotential& g,
                      const std::vector<VectorPotential>& factors,
                      const std::vector<int>& parent_states);

}  // namespace bffg
