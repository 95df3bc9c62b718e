#include <cmath>
#include <map>
#include <vector>

#include "bffg/engine.hpp"
#include "doctest.h"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace bffg;

namespace {

bool state_equal(const State& a, const State& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        const T& y = std::get<T>(b);
        if constexpr (std::is_same_v<T, Vec>) {
          if (x.size() != y.size()) return false;
          for (int i = 0; i < x.size(); ++i)
            if (x[i] != y[i]) return false;
          return true;
        } else {
          return x == y;
        }
      },
      a);
}

// Two-dimensional linear chain root -> 0 -> 1(leaf); exact within the
// Gaussian family so every weight is identically zero when matched.
Model gaussian_chain(bool shift_obs = false) {
  Mat a1 = (Mat(2, 2) << 0.9, 0.2, -0.1, 0.7).finished();
  Mat a2 = (Mat(2, 2) << 0.5, 0.0, 0.3, 1.1).finished();
  Vec b1 = (Vec(2) << 0.1, -0.4).finished();
  Vec b2 = (Vec(2) << 0.0, 0.25).finished();
  Mat q1 = (Mat(2, 2) << 0.30, 0.05, 0.05, 0.20).finished();
  Mat q2 = (Mat(2, 2) << 0.15, 0.00, 0.00, 0.40).finished();
  std::vector<Edge> edges;
  edges.push_back({{kRoot}, 0, GaussianKernel::linear(a1, b1, q1), {}});
  edges.push_back({{0}, 1, GaussianKernel::linear(a2, b2, q2), {}});
  Vec obs = (Vec(2) << 0.8, shift_obs ? -1.9 : -0.3).finished();
  Vec root = (Vec(2) << 0.2, -0.1).finished();
  return Model(std::move(edges), root, {{1, obs}});
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("backward root value matches brute-force enumeration") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng = make_rng(93, seed);
    testutil::FiniteTree t = testutil::random_finite_tree(rng, 6, 4, false);
    BackwardPass bp = run_backward(t.model);
    double truth = std::log(oracle::enumerate_likelihood(t.problem));
    CHECK(bp.root_log_value == doctest::Approx(truth).epsilon(1e-12));
  }
}

TEST_CASE("matched models carry zero forward weight") {
  Rng rng = make_rng(93, 50);
  testutil::FiniteTree t = testutil::random_finite_tree(rng, 6, 4, false);
  BackwardPass bp = run_backward(t.model);
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    Trajectory tr = run_forward(t.model, bp, 7, rep);
    CHECK(tr.ledger.root_log_value == bp.root_log_value);
    for (int e = 0; e < t.model.num_arcs(); ++e)
      CHECK(std::abs(tr.ledger.arc_log_weight[e]) <= 1e-10);
  }

  Model g = gaussian_chain();
  BackwardPass gbp = run_backward(g);
  Trajectory tr = run_forward(g, gbp, 7);
  for (int e = 0; e < g.num_arcs(); ++e) CHECK(std::abs(tr.ledger.arc_log_weight[e]) <= 1e-12);
}

TEST_CASE("forward sweeps are deterministic in the seed and replicate") {
  Rng rng = make_rng(93, 51);
  testutil::FiniteTree t = testutil::random_finite_tree(rng, 6, 4, true);
  BackwardPass bp = run_backward(t.model);
  Trajectory a = run_forward(t.model, bp, 11, 0);
  Trajectory b = run_forward(t.model, bp, 11, 0);
  REQUIRE(a.states.size() == b.states.size());
  for (size_t v = 0; v < a.states.size(); ++v) CHECK(state_equal(a.states[v], b.states[v]));
  CHECK(a.total_log_weight() == b.total_log_weight());

  // replicate enters the per-arc stream: a continuous state must move
  Model g = gaussian_chain();
  BackwardPass gbp = run_backward(g);
  Vec x0 = std::get<Vec>(run_forward(g, gbp, 11, 0).states[0]);
  Vec x1 = std::get<Vec>(run_forward(g, gbp, 11, 1).states[0]);
  CHECK((x0 - x1).cwiseAbs().maxCoeff() > 0);
}

TEST_CASE("reparameterized sweep replays the random sweep exactly") {
  Model g = gaussian_chain();
  REQUIRE(model_supports_reparam(g));
  BackwardPass bp = run_backward(g);
  Trajectory direct = run_forward(g, bp, 21, 3);
  InnovationSet z = draw_innovations(g, 21, 3);
  Trajectory replay = run_forward_reparam(g, bp, z);
  for (size_t v = 0; v < direct.states.size(); ++v)
    CHECK(state_equal(direct.states[v], replay.states[v]));
  CHECK(direct.total_log_weight() == replay.total_log_weight());

  InnovationSet back = extract_innovations(g, direct);
  REQUIRE(back.gauss[0].has_value());
  REQUIRE(z.gauss[0].has_value());
  const Vec& z0 = *z.gauss[0];
  const Vec& e0 = *back.gauss[0];
  REQUIRE(z0.size() == e0.size());
  for (int i = 0; i < z0.size(); ++i) CHECK(z0[i] == e0[i]);

  // diffusion edge: same replay contract on a path-valued arc
  Mat lin = (Mat(1, 1) << -0.5).finished();
  Vec shift = Vec::Zero(1);
  Mat disp = (Mat(1, 1) << 0.6).finished();
  Mat leaf_lin = Mat::Identity(1, 1);
  Mat leaf_cov = Mat::Identity(1, 1) * 1e-2;
  std::vector<Edge> edges;
  edges.push_back({{kRoot}, 0, SDEKernel::linear(lin, shift, disp, 0.3, 30), {}});
  edges.push_back({{0}, 1, GaussianKernel::linear(leaf_lin, Vec::Zero(1), leaf_cov), {}});
  Vec sroot = Vec::Zero(1);
  Vec sobs = (Vec(1) << 0.2).finished();
  Model sm(std::move(edges), sroot, {{1, sobs}});
  REQUIRE(model_supports_reparam(sm));
  BackwardPass sbp = run_backward(sm);
  Trajectory sd = run_forward(sm, sbp, 5, 1);
  Trajectory sr = run_forward_reparam(sm, sbp, draw_innovations(sm, 5, 1));
  CHECK(std::get<Vec>(sd.states[0])[0] == std::get<Vec>(sr.states[0])[0]);
  CHECK(sd.total_log_weight() == sr.total_log_weight());

  Rng rng = make_rng(93, 52);
  Model ft = testutil::random_finite_tree(rng, 6, 4, false).model;
  CHECK_FALSE(model_supports_reparam(ft));
}

TEST_CASE("likelihood estimate is exact for matched conjugate models") {
  Model g = gaussian_chain();
  BackwardPass bp = run_backward(g);
  LikelihoodEstimate est = estimate_likelihood(g, bp, 16, 99);
  CHECK(est.log_estimate == doctest::Approx(bp.root_log_value).epsilon(1e-12));
  CHECK(est.rel_std_error <= 1e-10);
  CHECK_FALSE(est.degenerate);
  CHECK(est.replicates == 16);
}

TEST_CASE("likelihood estimate is unbiased under a perturbed comparison kernel") {
  Rng rng = make_rng(93, 53);
  testutil::FiniteTree t = testutil::random_finite_tree(rng, 6, 4, true);
  BackwardPass bp = run_backward(t.model);
  double truth = oracle::enumerate_likelihood(t.problem);
  LikelihoodEstimate est = estimate_likelihood(t.model, bp, 20000, 4);
  double lin_est = std::exp(est.log_estimate);
  double se = lin_est * est.rel_std_error;
  CHECK(std::abs(lin_est - truth) <= 3 * se + 1e-12);
}

TEST_CASE("leaf data reaches the sampler only through the messages") {
  Model a = gaussian_chain(false);
  Model b = gaussian_chain(true);  // same wiring, different observation
  BackwardPass bpa = run_backward(a);
  Trajectory ta = run_forward(a, bpa, 31);
  Trajectory tb = run_forward(b, bpa, 31);  // same backward pass on purpose
  const Vec& xa = std::get<Vec>(ta.states[0]);
  const Vec& xb = std::get<Vec>(tb.states[0]);
  for (int i = 0; i < xa.size(); ++i) CHECK(xa[i] == xb[i]);
  // the trajectories still carry each model's own leaf data
  CHECK(std::get<Vec>(ta.states[1])[1] != std::get<Vec>(tb.states[1])[1]);
}

TEST_CASE("unconditional simulation is deterministic and well-typed") {
  Model g = gaussian_chain();
  std::vector<State> s1 = simulate_unconditional(g, 17);
  std::vector<State> s2 = simulate_unconditional(g, 17);
  std::vector<State> s3 = simulate_unconditional(g, 18);
  REQUIRE(s1.size() == 2);
  CHECK(state_equal(s1[0], s2[0]));
  CHECK(state_equal(s1[1], s2[1]));
  CHECK_FALSE(state_equal(s1[1], s3[1]));

  Rng rng = make_rng(93, 54);
  testutil::FiniteTree t = testutil::random_finite_tree(rng, 6, 4, false);
  std::vector<State> f = simulate_unconditional(t.model, 3);
  for (size_t v = 0; v < f.size(); ++v) CHECK(std::holds_alternative<int>(f[v]));
}

TEST_CASE("construction rejects ill-posed models") {
  Mat lin = Mat::Identity(2, 2);
  Vec shift = Vec::Zero(2);
  Mat cov = Mat::Identity(2, 2);
  Vec root = Vec::Zero(2);
  Vec zero2 = Vec::Zero(2);

  // leaf without data
  std::vector<Edge> e1;
  e1.push_back({{kRoot}, 0, GaussianKernel::linear(lin, shift, cov), {}});
  CHECK_THROWS_AS(Model(std::move(e1), root, {}), ValidationError);

  // data attached to an internal vertex
  std::vector<Edge> e2;
  e2.push_back({{kRoot}, 0, GaussianKernel::linear(lin, shift, cov), {}});
  e2.push_back({{0}, 1, GaussianKernel::linear(lin, shift, cov), {}});
  CHECK_THROWS_AS(Model(std::move(e2), root, {{0, zero2}, {1, zero2}}), ValidationError);

  // increment potentials cannot branch
  std::vector<Edge> e3;
  e3.push_back({{kRoot}, 0, GammaKernel::matched(2.0, 1.5), {}});
  e3.push_back({{0}, 1, GammaKernel::matched(1.0, 1.5), {}});
  e3.push_back({{0}, 2, GammaKernel::matched(1.0, 1.5), {}});
  CHECK_THROWS_AS(Model(std::move(e3), 0.0, {{1, 3.0}, {2, 4.0}}), ValidationError);

  // several sources demand a joint kernel
  Rng vrng = make_rng(93, 55);
  Mat trans = testutil::random_stochastic(vrng, 2, 2);
  std::vector<Edge> e4;
  e4.push_back({{kRoot}, 0, FiniteKernel::matched(trans), {}});
  e4.push_back({{kRoot}, 1, FiniteKernel::matched(trans), {}});
  e4.push_back({{0, 1}, 2, FiniteKernel::matched(trans), {}});
  CHECK_THROWS_AS(Model(std::move(e4), 0, {{2, 1}}), ValidationError);

  // estimator input validation
  Model g = gaussian_chain();
  BackwardPass bp = run_backward(g);
  CHECK_THROWS_AS(estimate_likelihood(g, bp, 0, 1), ValidationError);
}

}  // TEST_SUITE
