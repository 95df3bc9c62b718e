#include "bffg.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "bffg/model_file.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

int fail_code(std::exception_ptr ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const bffg::ValidationError& e) {
    g_last_error = e.what();
    return BFFG_EVALIDATION;
  } catch (const bffg::NumericError& e) {
    g_last_error = e.what();
    return BFFG_ENUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BFFG_EOTHER;
  } catch (...) {
    g_last_error = "unknown error";
    return BFFG_EOTHER;
  }
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BFFG_OK;
  } catch (...) {
    return fail_code(std::current_exception());
  }
}

int invalid(const char* what) {
  g_last_error = what;
  return BFFG_EVALIDATION;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json finite_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

json vec_json(const bffg::Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v[i]));
  return a;
}

json mat_json(const bffg::Mat& m) {
  json a = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(finite_or_null(m(r, c)));
    a.push_back(std::move(row));
  }
  return a;
}

json potential_json(const bffg::Potential& p) {
  json j;
  j["family"] = bffg::potential_family_name(p);
  std::visit(
      [&j](const auto& q) {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, bffg::GaussianPotential>) {
          j["log_scale"] = finite_or_null(q.log_scale);
          j["info_vec"] = vec_json(q.info_vec);
          j["info_mat"] = mat_json(q.info_mat);
        } else if constexpr (std::is_same_v<T, bffg::VectorPotential>) {
          j["log_values"] = vec_json(q.log_values);
        } else if constexpr (std::is_same_v<T, bffg::CountPotential>) {
          j["log_values"] = vec_json(q.log_values);
        } else if constexpr (std::is_same_v<T, bffg::GammaPotential>) {
          j["shape"] = q.shape;
          j["rate"] = q.rate;
          j["anchor"] = q.anchor;
        } else if constexpr (std::is_same_v<T, bffg::ChebyshevPotential>) {
          j["coeffs"] = vec_json(q.coeffs);
        } else {
          json rows = json::array();
          for (const bffg::Vec& v : q.log_values) rows.push_back(vec_json(v));
          j["log_values"] = std::move(rows);
        }
      },
      p);
  return j;
}

std::string format_value(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void append_state_rows(std::string& csv, int rep, int vertex, const bffg::State& s) {
  auto row = [&](int component, double value) {
    csv += std::to_string(rep) + ",state," + std::to_string(vertex) + "," +
           std::to_string(component) + "," + format_value(value) + "\n";
  };
  if (const auto* i = std::get_if<int>(&s)) {
    row(0, *i);
  } else if (const auto* d = std::get_if<double>(&s)) {
    row(0, *d);
  } else if (const auto* v = std::get_if<bffg::Vec>(&s)) {
    for (int i = 0; i < v->size(); ++i) row(i, (*v)[i]);
  } else {
    const auto& cfg = std::get<std::vector<int>>(s);
    for (size_t i = 0; i < cfg.size(); ++i) row(static_cast<int>(i), cfg[i]);
  }
}

}  // namespace

struct bffg_model {
  bffg::ModelSpec spec;
};

extern "C" {

const char* bffg_version(void) { return "1.0.0"; }

const char* bffg_last_error(void) { return g_last_error.c_str(); }

int bffg_model_load_file(const char* path, bffg_model** out) {
  if (!path || !out) return invalid("bffg_model_load_file: NULL argument");
  *out = nullptr;
  return guarded([&] { *out = new bffg_model{bffg::load_model_file(path)}; });
}

int bffg_model_load_string(const char* text, bffg_model** out) {
  if (!text || !out) return invalid("bffg_model_load_string: NULL argument");
  *out = nullptr;
  return guarded([&] { *out = new bffg_model{bffg::parse_model_text(text)}; });
}

void bffg_model_free(bffg_model* m) { delete m; }

int bffg_model_num_vertices(const bffg_model* m) {
  if (!m) return -1;
  try {
    return m->spec.instantiate().num_vertices();
  } catch (...) {
    (void)fail_code(std::current_exception());
    return -1;
  }
}

int bffg_model_num_edges(const bffg_model* m) {
  if (!m) return -1;
  try {
    return m->spec.instantiate().num_arcs();
  } catch (...) {
    (void)fail_code(std::current_exception());
    return -1;
  }
}

int bffg_model_param_count(const bffg_model* m) {
  return m ? static_cast<int>(m->spec.parameters.size()) : -1;
}

const char* bffg_model_param_name(const bffg_model* m, int index) {
  if (!m || index < 0 || index >= static_cast<int>(m->spec.parameters.size())) return nullptr;
  return m->spec.parameters[index].name.c_str();
}

int bffg_model_param_get(const bffg_model* m, const char* name, double* value) {
  if (!m || !name || !value) return invalid("bffg_model_param_get: NULL argument");
  for (const bffg::Parameter& p : m->spec.parameters) {
    if (p.name == name) {
      *value = p.value;
      g_last_error.clear();
      return BFFG_OK;
    }
  }
  return invalid("no such parameter");
}

int bffg_model_param_set(bffg_model* m, const char* name, double value) {
  if (!m || !name) return invalid("bffg_model_param_set: NULL argument");
  for (bffg::Parameter& p : m->spec.parameters) {
    if (p.name == name) {
      p.value = value;
      g_last_error.clear();
      return BFFG_OK;
    }
  }
  return invalid("no such parameter");
}

int bffg_filter_json(const bffg_model* m, char** out) {
  if (!m || !out) return invalid("bffg_filter_json: NULL argument");
  *out = nullptr;
  return guarded([&] {
    bffg::Model model = m->spec.instantiate();
    bffg::BackwardPass bp = bffg::run_backward(model);
    json doc;
    doc["format"] = "bffg-filter/1";
    json edges = json::array();
    for (int e = 0; e < model.num_arcs(); ++e) {
      json je;
      je["edge"] = e;
      je["target"] = model.edge(e).target;
      je["family"] = bffg::kernel_family_name(model.edge(e).kernel);
      json msgs = json::array();
      for (const bffg::Potential& p : bp.arc_messages[e]) msgs.push_back(potential_json(p));
      je["messages"] = std::move(msgs);
      edges.push_back(std::move(je));
    }
    doc["edges"] = std::move(edges);
    doc["root_potential"] = potential_json(bp.root_potential);
    doc["root_log_value"] = finite_or_null(bp.root_log_value);
    *out = dup_string(doc.dump(2));
    if (!*out) throw std::bad_alloc();
  });
}

int bffg_guide_csv(const bffg_model* m, int n, unsigned long long seed, char** out) {
  if (!m || !out) return invalid("bffg_guide_csv: NULL argument");
  if (n < 1) return invalid("bffg_guide_csv: need n >= 1");
  *out = nullptr;
  return guarded([&] {
    bffg::Model model = m->spec.instantiate();
    bffg::BackwardPass bp = bffg::run_backward(model);
    std::string csv = "# bffg-guide v1\nrep,kind,id,component,value\n";
    for (int rep = 0; rep < n; ++rep) {
      bffg::Trajectory t = bffg::run_forward(model, bp, seed, rep);
      for (int v = 0; v < model.num_vertices(); ++v) append_state_rows(csv, rep, v, t.states[v]);
      for (int e = 0; e < model.num_arcs(); ++e)
        csv += std::to_string(rep) + ",arc_log_weight," + std::to_string(e) + ",0," +
               format_value(t.ledger.arc_log_weight[e]) + "\n";
      csv += std::to_string(rep) + ",total_log_weight,0,0," +
             format_value(t.total_log_weight()) + "\n";
    }
    *out = dup_string(csv);
    if (!*out) throw std::bad_alloc();
  });
}

int bffg_log_likelihood(const bffg_model* m, int n, unsigned long long seed,
                        double* log_estimate, double* rel_std_error, int* degenerate) {
  if (!m || !log_estimate || !rel_std_error)
    return invalid("bffg_log_likelihood: NULL argument");
  return guarded([&] {
    bffg::Model model = m->spec.instantiate();
    bffg::BackwardPass bp = bffg::run_backward(model);
    bffg::LikelihoodEstimate est = bffg::estimate_likelihood(model, bp, n, seed);
    *log_estimate = est.log_estimate;
    *rel_std_error = est.rel_std_error;
    if (degenerate) *degenerate = est.degenerate ? 1 : 0;
  });
}

int bffg_mcmc_csv(const bffg_model* m, int iterations, int burnin, double lambda,
                  unsigned long long seed, char** out) {
  if (!m || !out) return invalid("bffg_mcmc_csv: NULL argument");
  *out = nullptr;
  return guarded([&] {
    if (m->spec.parameters.empty())
      throw bffg::ValidationError("the model declares no parameters to sample");
    bffg::MCMCOptions opt;
    opt.iterations = iterations;
    opt.burnin = burnin;
    opt.lambda = lambda;
    opt.seed = seed;
    bffg::ChainResult res = bffg::run_chain(m->spec.factory(), m->spec.parameters, opt);

    std::string csv = "# bffg-mcmc v1\n";
    csv += "# path_acceptance=" + format_value(res.trace.path_acceptance) + "\n";
    for (size_t k = 0; k < res.trace.names.size(); ++k)
      csv += "# theta_acceptance_" + res.trace.names[k] + "=" +
             format_value(res.trace.theta_acceptance[k]) + "\n";
    csv += "# burnin=" + std::to_string(res.trace.burnin) + "\n";
    csv += "iter";
    for (const std::string& name : res.trace.names) csv += "," + name;
    csv += ",log_psi\n";
    for (int it = 0; it < res.trace.theta.rows(); ++it) {
      csv += std::to_string(it);
      for (int k = 0; k < res.trace.theta.cols(); ++k)
        csv += "," + format_value(res.trace.theta(it, k));
      csv += "," + format_value(res.trace.log_psi[it]) + "\n";
    }
    *out = dup_string(csv);
    if (!*out) throw std::bad_alloc();
  });
}

int bffg_write_example_model(const char* name, unsigned long long seed, char** out) {
  if (!name || !out) return invalid("bffg_write_example_model: NULL argument");
  *out = nullptr;
  return guarded([&] {
    bffg::ModelSpec spec = bffg::make_example_spec(name);
    if (seed != 0) bffg::fill_observations(spec, seed);
    *out = dup_string(spec.text);
    if (!*out) throw std::bad_alloc();
  });
}

void bffg_string_free(char* s) { std::free(s); }

}  // extern "C"
