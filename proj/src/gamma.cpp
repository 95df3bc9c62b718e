#include "bffg/gamma.hpp"

#include <map>

namespace bffg {

namespace {

constexpr int kJacobiNodes = 32;

const GaussRule& tilt_rule(double g1, double g2) {
  static thread_local std::map<std::pair<double, double>, GaussRule> cache;
  auto key = std::make_pair(g1, g2);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, beta_expectation_rule(kJacobiNodes, g1, g2)).first;
  return it->second;
}

/* log E exp(-lambda Z), Z ~ Beta(g1, g2). */
double log_tilted_mean(double g1, double g2, double lambda) {
  const GaussRule& rule = tilt_rule(g1, g2);
  // factor the maximum of the integrand out for stability at large |lambda|
  double shift = lambda > 0 ? 0.0 : -lambda;
  double s = 0;
  for (int i = 0; i < rule.nodes.size(); ++i)
    s += rule.weights[i] * std::exp(-lambda * rule.nodes[i] - shift);
  return std::log(s) + shift;
}

}  // namespace

GammaKernel GammaKernel::matched(double shape, double rate) {
  if (shape <= 0 || rate <= 0) throw ValidationError("gamma kernel: shape and rate must be > 0");
  GammaKernel k;
  k.shape = shape;
  k.rate = [rate](double) { return rate; };
  k.aux_rate = rate;
  return k;
}

GammaKernel GammaKernel::state_rate(double shape, std::function<double(double)> rate,
                                    double aux_rate) {
  if (shape <= 0 || aux_rate <= 0)
    throw ValidationError("gamma kernel: shape and comparison rate must be > 0");
  GammaKernel k;
  k.shape = shape;
  k.rate = std::move(rate);
  k.aux_rate = aux_rate;
  return k;
}

GammaPotential gamma_pullback(const GammaKernel& k, const GammaPotential& g) {
  if (std::abs(g.rate - k.aux_rate) > 1e-12 * std::max(1.0, g.rate))
    throw ValidationError(
        "gamma_pullback: potential rate differs from the edge comparison rate; "
        "the comparison rate must be constant along the chain");
  return {g.shape + k.shape, g.rate, g.anchor};
}

GammaPotential gamma_fuse(const GammaPotential&, const GammaPotential&) {
  throw ValidationError(
      "gamma_fuse: branching is not supported for subordinator potentials "
      "(the product leaves the family); use a chain graph");
}

GammaPotential gamma_leaf_message(const GammaKernel& k, double obs) {
  return {k.shape, k.aux_rate, obs};
}

double expbeta_sample(Rng& rng, double g1, double g2, double lambda) {
  if (g1 <= 0 || g2 <= 0) throw ValidationError("expbeta_sample: shapes must be > 0");
  // envelope constant: exp(-lambda z) <= max(1, exp(-lambda)) on (0,1)
  double log_m = lambda < 0 ? -lambda : 0.0;
  for (long attempt = 0; attempt < 100000000L; ++attempt) {
    double z = draw_beta(rng, g1, g2);
    double log_accept = -lambda * z - log_m;
    if (std::log(draw_uniform(rng)) <= log_accept) return z;
  }
  throw NumericError("expbeta_sample: rejection sampler failed to accept (tilt too strong)");
}

double gamma_guided_sample(const GammaKernel& k, const GammaPotential& g, double x, Rng& rng) {
  double gap = g.anchor - x;
  if (gap <= 0)
    throw NumericError("gamma_guided_sample: state has reached the anchor; no support left");
  double beta_x = k.rate(x);
  if (beta_x <= 0) throw NumericError("gamma_guided_sample: forward rate not positive");
  double tilt = (beta_x - g.rate) * gap;
  double z = expbeta_sample(rng, k.shape, g.shape, tilt);
  return x + z * gap;
}

double gamma_log_weight(const GammaKernel& k, const GammaPotential& g, double x,
                        GammaWeightMethod method, Rng* rng, int mc_samples) {
  double gap = g.anchor - x;
  if (gap <= 0) return kNegInf;
  double beta_x = k.rate(x);
  if (beta_x <= 0) throw NumericError("gamma_log_weight: forward rate not positive");
  double tilt = (beta_x - k.aux_rate) * gap;
  double log_mean;
  if (method == GammaWeightMethod::Quadrature) {
    log_mean = log_tilted_mean(k.shape, g.shape, tilt);
  } else {
    if (!rng) throw ValidationError("gamma_log_weight: Monte Carlo route needs an rng");
    double shift = tilt > 0 ? 0.0 : -tilt;
    double s = 0;
    for (int i = 0; i < mc_samples; ++i) {
      double z = draw_beta(*rng, k.shape, g.shape);
      s += std::exp(-tilt * z - shift);
    }
    log_mean = std::log(s / mc_samples) + shift;
  }
  return k.shape * (std::log(beta_x) - std::log(k.aux_rate)) + log_mean;
}

double gamma_leaf_log_weight(const GammaKernel& k, double obs, const GammaPotential& message,
                             double x) {
  double beta_x = k.rate(x);
  if (beta_x <= 0) throw NumericError("gamma_leaf_log_weight: forward rate not positive");
  return log_gamma_pdf(obs - x, k.shape, beta_x) - message.log_eval(x);
}

}  // namespace bffg
