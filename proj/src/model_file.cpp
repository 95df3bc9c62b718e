#include "bffg/model_file.hpp"

#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "json.hpp"

namespace bffg {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "bffg-model/1";

[[noreturn]] void fail(const std::string& what) { throw ValidationError("model file: " + what); }

const json& need(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

struct ParamTable {
  std::vector<Parameter> params;

  int index_of(const std::string& name) const {
    for (size_t i = 0; i < params.size(); ++i)
      if (params[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

double resolve_scalar(const json& j, const ParamTable& pt, const Vec& theta) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    double sign = 1.0;
    if (!s.empty() && s[0] == '-') {
      sign = -1.0;
      s = s.substr(1);
    }
    int idx = pt.index_of(s);
    if (idx < 0) fail("unknown parameter reference '" + s + "'");
    return sign * theta[idx];
  }
  fail("scalar fields must be numbers or parameter references");
}

Vec resolve_vec(const json& j, const ParamTable& pt, const Vec& theta) {
  if (!j.is_array()) fail("expected an array of scalars");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = resolve_scalar(j[i], pt, theta);
  return v;
}

Mat resolve_mat(const json& j, const ParamTable& pt, const Vec& theta) {
  if (!j.is_array() || j.empty()) fail("expected a non-empty array of rows");
  Mat m(j.size(), j[0].size());
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != j[0].size()) fail("ragged matrix");
    for (size_t c = 0; c < j[r].size(); ++c) m(r, c) = resolve_scalar(j[r][c], pt, theta);
  }
  return m;
}

State state_from_json(const json& j) {
  std::string type = need(j, "type").get<std::string>();
  const json& v = need(j, "value");
  if (type == "int") return v.get<int>();
  if (type == "double") return v.get<double>();
  if (type == "vector") {
    Vec x(v.size());
    for (size_t i = 0; i < v.size(); ++i) x[i] = v[i].get<double>();
    return x;
  }
  if (type == "config") return v.get<std::vector<int>>();
  fail("unknown state type '" + type + "'");
}

json state_to_json(const State& s) {
  json j;
  if (const auto* i = std::get_if<int>(&s)) {
    j["type"] = "int";
    j["value"] = *i;
  } else if (const auto* d = std::get_if<double>(&s)) {
    j["type"] = "double";
    j["value"] = *d;
  } else if (const auto* v = std::get_if<Vec>(&s)) {
    j["type"] = "vector";
    j["value"] = std::vector<double>(v->data(), v->data() + v->size());
  } else {
    j["type"] = "config";
    j["value"] = std::get<std::vector<int>>(s);
  }
  return j;
}

Mat diag_or_full(const json& k, const char* diag_key, const char* full_key, const ParamTable& pt,
                 const Vec& theta) {
  if (k.contains(diag_key)) {
    Vec d = resolve_vec(k[diag_key], pt, theta);
    return Mat(d.asDiagonal());
  }
  return resolve_mat(need(k, full_key), pt, theta);
}

Kernel kernel_from_json(const json& k, const ParamTable& pt, const Vec& theta) {
  std::string family = need(k, "family").get<std::string>();

  if (family == "gaussian_linear") {
    return GaussianKernel::linear(resolve_mat(need(k, "lin"), pt, theta),
                                  resolve_vec(need(k, "shift"), pt, theta),
                                  diag_or_full(k, "cov_diag", "cov", pt, theta));
  }
  if (family == "sde_linear" || family == "sde_tanh") {
    Mat b = resolve_mat(need(k, "b"), pt, theta);
    Mat sigma = diag_or_full(k, "sigma_diag", "sigma", pt, theta);
    double tau = resolve_scalar(need(k, "tau"), pt, theta);
    int steps = k.value("steps", 0);
    if (family == "sde_linear") {
      Vec beta = k.contains("beta") ? resolve_vec(k["beta"], pt, theta)
                                    : Vec(Vec::Zero(b.rows()));
      return SDEKernel::linear(b, beta, sigma, tau, steps);
    }
    Mat aux_b = k.contains("aux_b") ? resolve_mat(k["aux_b"], pt, theta) : b;
    Vec aux_beta = k.contains("aux_beta") ? resolve_vec(k["aux_beta"], pt, theta)
                                          : Vec(Vec::Zero(b.rows()));
    auto drift = [b](double, const Vec& x) -> Vec { return (b * x).array().tanh(); };
    auto disp = [sigma](double, const Vec&) -> Mat { return sigma; };
    return SDEKernel::nonlinear(drift, disp, aux_b, aux_beta, sigma, tau, steps);
  }
  if (family == "finite") {
    Mat t = resolve_mat(need(k, "trans"), pt, theta);
    return k.contains("aux") ? FiniteKernel::with_aux(t, resolve_mat(k["aux"], pt, theta))
                             : FiniteKernel::matched(t);
  }
  if (family == "finite_joint") {
    auto cards = need(k, "parent_cards").get<std::vector<int>>();
    Mat t = resolve_mat(need(k, "trans"), pt, theta);
    return k.contains("aux")
               ? FiniteJointKernel::with_aux(cards, t, resolve_mat(k["aux"], pt, theta))
               : FiniteJointKernel::matched(cards, t);
  }
  if (family == "ctmc") {
    Mat q = resolve_mat(need(k, "rates"), pt, theta);
    double tau = resolve_scalar(need(k, "tau"), pt, theta);
    return k.contains("aux") ? CTMCKernel::with_aux(q, resolve_mat(k["aux"], pt, theta), tau)
                             : CTMCKernel::matched(q, tau);
  }
  if (family == "gamma") {
    double shape = resolve_scalar(need(k, "shape"), pt, theta);
    double rate = resolve_scalar(need(k, "rate"), pt, theta);
    if (!k.contains("aux_rate")) return GammaKernel::matched(shape, rate);
    double aux = resolve_scalar(k["aux_rate"], pt, theta);
    return GammaKernel::state_rate(shape, [rate](double) { return rate; }, aux);
  }
  if (family == "sis") {
    Vec infect = resolve_vec(need(k, "infect"), pt, theta);
    Vec recover = resolve_vec(need(k, "recover"), pt, theta);
    auto nbrs = need(k, "neighbors").get<std::vector<std::vector<int>>>();
    if (k.contains("aux_infect") || k.contains("aux_recover"))
      return SISKernel::make(infect, recover, std::move(nbrs),
                             resolve_scalar(need(k, "aux_infect"), pt, theta),
                             resolve_scalar(need(k, "aux_recover"), pt, theta));
    return SISKernel::make(infect, recover, std::move(nbrs));
  }
  if (family == "sis_obs") {
    SISObsKernel o;
    o.report_prob = resolve_scalar(need(k, "report_prob"), pt, theta);
    o.agents = need(k, "agents").get<int>();
    return o;
  }
  if (family == "wf") {
    return WFKernel::make(resolve_scalar(need(k, "mut0"), pt, theta),
                          resolve_scalar(need(k, "mut1"), pt, theta),
                          need(k, "order").get<int>(),
                          resolve_scalar(need(k, "tau"), pt, theta), k.value("steps", 0));
  }
  if (family == "binomial_obs") {
    BinomialObsKernel o;
    o.trials = need(k, "trials").get<int>();
    o.order = need(k, "order").get<int>();
    return o;
  }
  fail("unknown kernel family '" + family + "'");
}

json parse_doc(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) fail("not valid JSON");
  if (!doc.is_object() || need(doc, "format").get<std::string>() != kFormatTag)
    fail(std::string("expected format tag '") + kFormatTag + "'");
  return doc;
}

std::vector<Parameter> read_parameters(const json& doc) {
  std::vector<Parameter> out;
  if (!doc.contains("parameters")) return out;
  for (const json& p : doc["parameters"]) {
    Parameter q;
    q.name = need(p, "name").get<std::string>();
    q.value = need(p, "value").get<double>();
    q.lower = p.value("lower", -kInf);
    q.upper = p.value("upper", kInf);
    q.step = p.value("step", 0.1);
    if (q.name.empty() || q.name[0] == '-') fail("parameter names cannot start with '-'");
    for (const Parameter& seen : out)
      if (seen.name == q.name) fail("duplicate parameter '" + q.name + "'");
    out.push_back(std::move(q));
  }
  return out;
}

Model build_model(const json& doc, const ParamTable& pt, const Vec& theta,
                  bool placeholder_obs) {
  if (theta.size() != static_cast<int>(pt.params.size()))
    fail("theta length does not match the declared parameters");

  std::vector<Edge> edges;
  for (const json& je : need(doc, "edges")) {
    Edge ed;
    ed.sources = need(je, "sources").get<std::vector<int>>();
    ed.target = need(je, "target").get<int>();
    ed.kernel = kernel_from_json(need(je, "kernel"), pt, theta);
    if (je.contains("parent_weighting"))
      ed.parent_weighting = resolve_vec(je["parent_weighting"], pt, theta);
    edges.push_back(std::move(ed));
  }

  std::map<VertexId, State> obs;
  for (const json& jo : doc.value("observations", json::array()))
    obs[need(jo, "vertex").get<int>()] = state_from_json(jo);

  if (placeholder_obs) {
    // shape-correct dummies at every leaf so the model validates; the values
    // are never read by the unconditional simulator
    std::set<VertexId> has_out;
    for (const Edge& e : edges)
      for (VertexId s : e.sources) has_out.insert(s);
    for (const Edge& e : edges) {
      if (has_out.count(e.target) || obs.count(e.target)) continue;
      std::visit(
          [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GaussianKernel>)
              obs[e.target] = Vec(Vec::Zero(k.dim_out));
            else if constexpr (std::is_same_v<T, GammaKernel>)
              obs[e.target] = 1.0;
            else if constexpr (std::is_same_v<T, ParticleObsKernel>)
              obs[e.target] = std::vector<int>(k.emission.size(), 0);
            else
              obs[e.target] = 0;
          },
          e.kernel);
    }
  }

  return Model(std::move(edges), state_from_json(need(doc, "root")), std::move(obs));
}

ModelSpec from_doc(json doc) {
  ModelSpec spec;
  spec.parameters = read_parameters(doc);
  spec.text = doc.dump(2);
  ParamTable pt{spec.parameters};
  build_model(doc, pt, [&] {
    Vec t(spec.parameters.size());
    for (size_t i = 0; i < spec.parameters.size(); ++i) t[i] = spec.parameters[i].value;
    return t;
  }(), true);  // full validation up front, observations optional
  return spec;
}

}  // namespace

Vec ModelSpec::default_theta() const {
  Vec t(parameters.size());
  for (size_t i = 0; i < parameters.size(); ++i) t[i] = parameters[i].value;
  return t;
}

Model ModelSpec::instantiate(const Vec& theta) const {
  json doc = parse_doc(text);
  return build_model(doc, ParamTable{parameters}, theta, false);
}

Model ModelSpec::instantiate() const { return instantiate(default_theta()); }

ModelFactory ModelSpec::factory() const {
  auto doc = std::make_shared<const json>(parse_doc(text));
  auto pt = std::make_shared<const ParamTable>(ParamTable{parameters});
  return [doc, pt](const Vec& theta) { return build_model(*doc, *pt, theta, false); };
}

bool ModelSpec::has_observations() const {
  json doc = parse_doc(text);
  return doc.contains("observations") && !doc["observations"].empty();
}

ModelSpec parse_model_text(const std::string& text) { return from_doc(parse_doc(text)); }

ModelSpec load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_text(ss.str());
}

void save_model_file(const ModelSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model file: " + path);
  out << spec.text << "\n";
}

void fill_observations(ModelSpec& spec, std::uint64_t seed) {
  json doc = parse_doc(spec.text);
  ParamTable pt{spec.parameters};
  Model m = build_model(doc, pt, spec.default_theta(), true);
  std::vector<State> states = simulate_unconditional(m, seed);

  json obs = json::array();
  for (VertexId v : m.topology().leaves()) {
    json jo = state_to_json(states[v]);
    jo["vertex"] = v;
    obs.push_back(std::move(jo));
  }
  doc["observations"] = std::move(obs);
  spec.text = doc.dump(2);
}

namespace {

json tanh_tree_doc() {
  json doc;
  doc["format"] = kFormatTag;
  doc["parameters"] = json::array({
      {{"name", "theta0"}, {"value", 0.0}, {"lower", 0.0}, {"upper", 5.0}, {"step", 0.1}},
      {{"name", "theta1"}, {"value", 0.65}, {"lower", 0.0}, {"upper", 5.0}, {"step", 0.2}},
      {{"name", "sigma0"}, {"value", 0.1}, {"lower", 0.01}, {"upper", 5.0}, {"step", 0.03}},
      {{"name", "sigma1"}, {"value", 0.4}, {"lower", 0.01}, {"upper", 5.0}, {"step", 0.08}},
  });
  doc["root"] = {{"type", "vector"}, {"value", {0.6, -0.6}}};

  // three levels of diffusion edges: 1 + 3 + 13 internal vertices, each of
  // the 13 terminal ones observed through an isotropic Gaussian leaf
  std::vector<std::pair<int, int>> arcs = {{-1, 0}, {0, 1}, {0, 2}, {0, 3}};
  int next = 4;
  std::vector<int> terminals;
  std::vector<int> fanout = {4, 4, 5};
  for (int b = 0; b < 3; ++b)
    for (int c = 0; c < fanout[b]; ++c) {
      arcs.push_back({1 + b, next});
      terminals.push_back(next++);
    }

  Rng tau_rng = make_rng(7, 0);
  json edges = json::array();
  for (auto [s, t] : arcs) {
    double tau = 0.4 + 0.4 * draw_uniform(tau_rng);
    json b = json::array(
        {json::array({"-theta0", "theta0"}), json::array({"theta1", "-theta1"})});
    json k = {{"family", "sde_tanh"}, {"dim", 2},         {"wdim", 2},
              {"tau", tau},           {"b", std::move(b)}, {"sigma_diag", {"sigma0", "sigma1"}}};
    edges.push_back({{"sources", {s}}, {"target", t}, {"kernel", k}});
  }
  for (int t : terminals) {
    json k = {{"family", "gaussian_linear"},
              {"lin", {{1.0, 0.0}, {0.0, 1.0}}},
              {"shift", {0.0, 0.0}},
              {"cov", {{1e-3, 0.0}, {0.0, 1e-3}}}};
    edges.push_back({{"sources", {t}}, {"target", next}, {"kernel", k}});
    ++next;
  }
  doc["edges"] = std::move(edges);
  return doc;
}

json finite_chain_doc() {
  json doc;
  doc["format"] = kFormatTag;
  doc["parameters"] = json::array();
  doc["root"] = {{"type", "int"}, {"value", 0}};
  json trans = {{0.7, 0.2, 0.1}, {0.15, 0.7, 0.15}, {0.1, 0.2, 0.7}};
  json emit = {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}};
  json edges = json::array();
  int v = 0;
  for (int step = 0; step < 4; ++step) {
    edges.push_back({{"sources", {step == 0 ? -1 : v - 1}},
                     {"target", v},
                     {"kernel", {{"family", "finite"}, {"trans", trans}}}});
    ++v;
  }
  for (int s = 0; s < 4; ++s) {
    edges.push_back({{"sources", {s}},
                     {"target", v},
                     {"kernel", {{"family", "finite"}, {"trans", emit}}}});
    ++v;
  }
  doc["edges"] = std::move(edges);
  return doc;
}

}  // namespace

std::vector<std::string> example_spec_names() { return {"tanh_tree", "finite_chain"}; }

ModelSpec make_example_spec(const std::string& name) {
  json doc;
  std::uint64_t sim_seed = 0;
  if (name == "tanh_tree") {
    doc = tanh_tree_doc();
    sim_seed = 11;
  } else if (name == "finite_chain") {
    doc = finite_chain_doc();
    sim_seed = 5;
  } else {
    fail("unknown example '" + name + "' (have: tanh_tree, finite_chain)");
  }
  ModelSpec spec = from_doc(std::move(doc));
  fill_observations(spec, sim_seed);
  return spec;
}

}  // namespace bffg
