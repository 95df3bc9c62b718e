#pragma once

#include <vector>

#include "bffg/potential.hpp"
#include "bffg/random.hpp"

namespace bffg {

/* Agent epidemic transition: agent i flips 0->1 with probability
 * infect[i] * (infected fraction of its neighborhood), stays infected with
 * probability 1 - recover[i].  The comparison dynamics replace the
 * neighborhood coupling by population-level rates aux_infect * count / N and
 * 1 - aux_recover, which makes the backward potentials functions of the
 * infection count alone. */
struct SISKernel {
  Vec infect;
  Vec recover;
  std::vector<std::vector<int>> neighbors;
  double aux_infect = 0;
  double aux_recover = 0;

  int agents() const { return static_cast<int>(infect.size()); }

  /* aux rates default to the population means of infect / recover. */
  static SISKernel make(const Vec& infect, const Vec& recover,
                        std::vector<std::vector<int>> neighbors);
  static SISKernel make(const Vec& infect, const Vec& recover,
                        std::vector<std::vector<int>> neighbors, double aux_infect,
                        double aux_recover);
};

/* Leaf edge: observed count ~ Binomial(infected count, report_prob). */
struct SISObsKernel {
  double report_prob = 1.0;
  int agents = 0;
};

/* Per-agent flip probabilities alpha_i(x) under the forward dynamics. */
Vec sis_flip_probs(const SISKernel& k, const std::vector<int>& x);

/* pmf of a sum of independent Bernoulli(probs[i]) variables; O(n^2) exact
 * convolution. */
Vec poibin_pmf(const Vec& probs);

/* Draw a Bernoulli vector with success probabilities probs conditioned on its
 * sum being total, by a backward dynamic program over suffix sums. */
std::vector<int> condber_sample(const Vec& probs, int total, Rng& rng);

CountPotential sis_pullback(const SISKernel& k, const CountPotential& g);

CountPotential sis_fuse(const CountPotential& a, const CountPotential& b);

CountPotential sis_leaf_message(const SISObsKernel& k, int obs);

/* Two-stage guided draw: first the next infection count (forward count law
 * tilted by g), then the configuration given the count. */
std::vector<int> sis_guided_sample(const SISKernel& k, const CountPotential& g,
                                   const std::vector<int>& x, Rng& rng);

double sis_log_weight(const SISKernel& k, const CountPotential& g, const CountPotential& message,
                      const std::vector<int>& x);

double sis_leaf_log_weight(const SISObsKernel& k, int obs, const CountPotential& message,
                           const std::vector<int>& x);

int sis_infected_count(const std::vector<int>& x);

}  // namespace bffg
