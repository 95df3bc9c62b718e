#include "bffg/potential.hpp"

namespace bffg {

const char* potential_family_name(const Potential& p) {
  struct Visitor {
    const char* operator()(const GaussianPotential&) const { return "gaussian"; }
    const char* operator()(const VectorPotential&) const { return "finite"; }
    const char* operator()(const CountPotential&) const { return "count"; }
    const char* operator()(const GammaPotential&) const { return "gamma"; }
    const char* operator()(const ChebyshevPotential&) const { return "chebyshev"; }
    const char* operator()(const ParticlePotential&) const { return "particle"; }
  };
  return std::visit(Visitor{}, p);
}

namespace {

int infected_count(const std::vector<int>& config) {
  int c = 0;
  for (int s : config) c += (s == 1);
  return c;
}

}  // namespace

double potential_log_eval(const Potential& p, const State& x) {
  if (auto* g = std::get_if<GaussianPotential>(&p)) {
    if (auto* v = std::get_if<Vec>(&x)) return g->log_eval(*v);
  } else if (auto* g = std::get_if<VectorPotential>(&p)) {
    if (auto* k = std::get_if<int>(&x)) return g->log_eval(*k);
  } else if (auto* g = std::get_if<CountPotential>(&p)) {
    if (auto* cfg = std::get_if<std::vector<int>>(&x))
      return g->log_eval_count(infected_count(*cfg));
    if (auto* k = std::get_if<int>(&x)) return g->log_eval_count(*k);
  } else if (auto* g = std::get_if<GammaPotential>(&p)) {
    if (auto* y = std::get_if<double>(&x)) return g->log_eval(*y);
  } else if (auto* g = std::get_if<ChebyshevPotential>(&p)) {
    if (auto* y = std::get_if<double>(&x)) return g->log_eval(*y);
  } else if (auto* g = std::get_if<ParticlePotential>(&p)) {
    if (auto* cfg = std::get_if<std::vector<int>>(&x)) return g->log_eval(*cfg);
  }
  throw ValidationError(std::string("potential_log_eval: state type does not match family ") +
                        potential_family_name(p));
}

}  // namespace bffg
