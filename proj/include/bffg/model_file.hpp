#pragma once

#include <string>
#include <vector>

#include "bffg/mcmc.hpp"

namespace bffg {

/* A model document: the parsed JSON plus the declared parameter blocks.
 *
 * Schema (format tag "bffg-model/1"):
 *   parameters   [{name, value, lower?, upper?, step?}, ...]
 *   root         {type: int|double|vector|config, value}
 *   edges        [{sources: [..], target, parent_weighting?, kernel: {...}}]
 *   observations [{vertex, type, value}, ...]
 *
 * Kernel objects carry a "family" tag; every scalar field may be either a
 * number or a parameter reference — the parameter's name as a string, with
 * an optional leading '-' for negation — so one document doubles as the
 * model factory for inference.  Supported families: gaussian_linear,
 * sde_linear, sde_tanh, finite, finite_joint, ctmc, gamma, sis, sis_obs,
 * wf, binomial_obs. */
struct ModelSpec {
  std::string text;  // normalized JSON document
  std::vector<Parameter> parameters;

  Vec default_theta() const;
  Model instantiate(const Vec& theta) const;
  Model instantiate() const;  // at the declared parameter values
  ModelFactory factory() const;
  bool has_observations() const;
};

ModelSpec parse_model_text(const std::string& text);
ModelSpec load_model_file(const std::string& path);
void save_model_file(const ModelSpec& spec, const std::string& path);

/* Simulate the unconditional process under the declared parameter values and
 * attach the leaf emissions as the document's observations. */
void fill_observations(ModelSpec& spec, std::uint64_t seed);

/* Built-in documents: "tanh_tree" (the two-component diffusion tree with
 * noisy Gaussian leaf observations, parameters theta0, theta1, sigma0,
 * sigma1) and "finite_chain" (a three-state chain demo).  Both come with
 * observations already generated. */
ModelSpec make_example_spec(const std::string& name);

std::vector<std::string> example_spec_names();

}  // namespace bffg
