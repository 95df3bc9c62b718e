// Command-line front end; talks to the library exclusively through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bffg.h"

namespace {

struct ThetaOverride {
  std::string name;
  double value = 0;
};

/* --theta name=value, repeatable */
std::vector<ThetaOverride> parse_theta(const std::vector<std::string>& raw) {
  std::vector<ThetaOverride> out;
  for (const std::string& s : raw) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw CLI::ValidationError("--theta", "expected name=value, got '" + s + "'");
    ThetaOverride o;
    o.name = s.substr(0, eq);
    try {
      o.value = std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--theta", "bad number in '" + s + "'");
    }
    out.push_back(std::move(o));
  }
  return out;
}

[[noreturn]] void die(int code) {
  std::cerr << "error: " << bffg_last_error() << "\n";
  std::exit(code == BFFG_OK ? BFFG_EOTHER : code);
}

bffg_model* load_model(const std::string& path, const std::vector<ThetaOverride>& theta) {
  bffg_model* m = nullptr;
  int rc = bffg_model_load_file(path.c_str(), &m);
  if (rc != BFFG_OK) die(rc);
  for (const ThetaOverride& o : theta) {
    rc = bffg_model_param_set(m, o.name.c_str(), o.value);
    if (rc != BFFG_OK) die(rc);
  }
  return m;
}

void write_output(const std::string& out_path, const char* text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) {
    std::cerr << "error: cannot write " << out_path << "\n";
    std::exit(BFFG_EOTHER);
  }
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backward filtering / forward guiding on directed trees and DAGs"};
  app.require_subcommand(1);

  std::string model_path, out_path;
  std::vector<std::string> theta_raw;
  int n = 1000;
  unsigned long long seed = 1;

  auto add_common = [&](CLI::App* cmd, bool needs_model = true) {
    if (needs_model)
      cmd->add_option("--model", model_path, "model file (JSON)")->required();
    cmd->add_option("--theta", theta_raw, "override a parameter, name=value (repeatable)");
    cmd->add_option("--out", out_path, "output path ('-' = stdout, the default)");
    cmd->add_option("--seed", seed, "random seed");
  };

  CLI::App* filter = app.add_subcommand("filter", "backward pass; edge messages as JSON");
  add_common(filter);

  CLI::App* guide = app.add_subcommand("guide", "sample guided trajectories; CSV");
  add_common(guide);
  guide->add_option("--n", n, "number of trajectories");

  CLI::App* lik = app.add_subcommand("likelihood", "importance-sampling likelihood estimate");
  add_common(lik);
  lik->add_option("--n", n, "number of guided draws");

  int iters = 2000, burnin = 0;
  double lambda = 0.9;
  CLI::App* mcmc = app.add_subcommand("mcmc", "posterior sampling over declared parameters");
  add_common(mcmc);
  mcmc->add_option("--iters", iters, "MCMC iterations");
  mcmc->add_option("--burnin", burnin, "burn-in iterations (recorded in the trace)");
  mcmc->add_option("--lambda", lambda, "pCN memory parameter in [0,1)");

  std::string example_name = "tanh_tree";
  CLI::App* gen = app.add_subcommand("generate", "write a built-in example model file");
  gen->add_option("--name", example_name, "tanh_tree or finite_chain");
  gen->add_option("--out", out_path, "output path ('-' = stdout, the default)");
  gen->add_option("--seed", seed, "0 = canned observations; else regenerate with this seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : BFFG_EVALIDATION;
  }

  std::vector<ThetaOverride> theta;
  try {
    theta = parse_theta(theta_raw);
  } catch (const CLI::ParseError& e) {
    return app.exit(e), BFFG_EVALIDATION;
  }

  if (gen->parsed()) {
    char* text = nullptr;
    unsigned long long gen_seed = gen->count("--seed") ? seed : 0;
    int rc = bffg_write_example_model(example_name.c_str(), gen_seed, &text);
    if (rc != BFFG_OK) die(rc);
    write_output(out_path, text);
    bffg_string_free(text);
    return 0;
  }

  bffg_model* m = load_model(model_path, theta);
  int rc = BFFG_OK;

  if (filter->parsed()) {
    char* text = nullptr;
    rc = bffg_filter_json(m, &text);
    if (rc != BFFG_OK) die(rc);
    write_output(out_path, (std::string(text) + "\n").c_str());
    bffg_string_free(text);
  } else if (guide->parsed()) {
    char* text = nullptr;
    rc = bffg_guide_csv(m, n, seed, &text);
    if (rc != BFFG_OK) die(rc);
    write_output(out_path, text);
    bffg_string_free(text);
  } else if (lik->parsed()) {
    double log_est = 0, rel_se = 0;
    int degenerate = 0;
    rc = bffg_log_likelihood(m, n, seed, &log_est, &rel_se, &degenerate);
    if (rc != BFFG_OK) die(rc);
    std::printf("log_likelihood %.12g\n", log_est);
    std::printf("rel_std_error %.6g\n", rel_se);
    std::printf("replicates %d\n", n);
    if (degenerate) std::printf("degenerate 1\n");
  } else if (mcmc->parsed()) {
    char* text = nullptr;
    rc = bffg_mcmc_csv(m, iters, burnin, lambda, seed, &text);
    if (rc != BFFG_OK) die(rc);
    write_output(out_path, text);
    bffg_string_free(text);
  }

  bffg_model_free(m);
  return 0;
}
