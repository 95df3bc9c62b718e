#include <cmath>
#include <vector>

#include "bffg/dag.hpp"
#include "bffg/finite_state.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bffg;

TEST_SUITE("dag") {

TEST_CASE("mixed-radix encoding round trips with the first parent slowest") {
  std::vector<int> cards{3, 2, 4};
  CHECK(joint_size(cards) == 24);
  // first coordinate carries the largest stride
  CHECK(joint_index(cards, {0, 0, 0}) == 0);
  CHECK(joint_index(cards, {0, 0, 1}) == 1);
  CHECK(joint_index(cards, {0, 1, 0}) == 4);
  CHECK(joint_index(cards, {1, 0, 0}) == 8);
  CHECK(joint_index(cards, {2, 1, 3}) == 23);
  for (int idx = 0; idx < 24; ++idx) {
    std::vector<int> cfg = joint_config(cards, idx);
    REQUIRE(cfg.size() == 3);
    for (size_t u = 0; u < cfg.size(); ++u) {
      CHECK(cfg[u] >= 0);
      CHECK(cfg[u] < cards[u]);
    }
    CHECK(joint_index(cards, cfg) == idx);
  }
}

TEST_CASE("joint pullback is a row-wise log dot with the child potential") {
  Rng rng = make_rng(92, 0);
  std::vector<int> cards{2, 3};
  Mat trans = testutil::random_stochastic(rng, 6, 2);
  Mat aux = testutil::perturb_stochastic(rng, trans);
  FiniteJointKernel k = FiniteJointKernel::with_aux(cards, trans, aux);
  VectorPotential g{(Vec(2) << -0.7, 0.4).finished()};
  VectorPotential m = dag_joint_pullback(k, g);
  REQUIRE(m.size() == 6);
  for (int r = 0; r < 6; ++r) {
    double expect = std::log(aux(r, 0) * std::exp(-0.7) + aux(r, 1) * std::exp(0.4));
    CHECK(m.log_values[r] == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("single-parent factorization returns the joint potential unchanged") {
  VectorPotential joint{(Vec(3) << 0.2, -1.1, 0.9).finished()};
  Vec pi = (Vec(3) << 0.5, 0.25, 0.25).finished();
  std::vector<VectorPotential> f = dag_factorize({3}, joint, pi);
  REQUIRE(f.size() == 1);
  REQUIRE(f[0].size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(f[0].log_values[i] == joint.log_values[i]);
}

TEST_CASE("factors are conditional expectations under the reference law") {
  Rng rng = make_rng(92, 1);
  std::vector<int> cards{2, 3};
  VectorPotential joint{Vec(6)};
  for (int i = 0; i < 6; ++i) joint.log_values[i] = 2 * draw_uniform(rng) - 1;
  Vec pi(6);
  for (int i = 0; i < 6; ++i) pi[i] = 0.05 + draw_uniform(rng);
  pi /= pi.sum();

  std::vector<VectorPotential> f = dag_factorize(cards, joint, pi);
  REQUIRE(f.size() == 2);
  for (size_t u = 0; u < 2; ++u) {
    REQUIRE(f[u].size() == cards[u]);
    for (int s = 0; s < cards[u]; ++s) {
      double num = 0, den = 0;
      for (int idx = 0; idx < 6; ++idx) {
        std::vector<int> cfg = joint_config(cards, idx);
        if (cfg[u] != s) continue;
        num += pi[idx] * std::exp(joint.log_values[idx]);
        den += pi[idx];
      }
      CHECK(f[u].log_values[s] == doctest::Approx(std::log(num / den)).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero-mass states fall back to the unconditional mean") {
  std::vector<int> cards{2, 2};
  VectorPotential joint{(Vec(4) << 0.3, -0.2, 1.0, 0.1).finished()};
  Vec pi = (Vec(4) << 0.6, 0.4, 0.0, 0.0).finished();  // parent 0 never equals 1
  std::vector<VectorPotential> f = dag_factorize(cards, joint, pi);
  double uncond = 0;
  for (int i = 0; i < 4; ++i) uncond += pi[i] * std::exp(joint.log_values[i]);
  CHECK(f[0].log_values[1] == doctest::Approx(std::log(uncond)).epsilon(1e-12));

  Vec bad = (Vec(4) << 0.5, 0.5, 0.5, 0.5).finished();
  CHECK_THROWS_AS(dag_factorize(cards, joint, bad), ValidationError);
}

TEST_CASE("guided draw follows the tilted row") {
  Rng rng = make_rng(92, 2);
  std::vector<int> cards{2, 2};
  Mat trans = testutil::random_stochastic(rng, 4, 3);
  FiniteJointKernel k = FiniteJointKernel::matched(cards, trans);
  VectorPotential g{(Vec(3) << 0.5, -0.9, 0.0).finished()};
  std::vector<int> parents{1, 0};
  int row = joint_index(cards, parents);

  Vec target(3);
  for (int y = 0; y < 3; ++y) target[y] = trans(row, y) * std::exp(g.log_values[y]);
  target /= target.sum();

  const int n = 200000;
  Vec counts = Vec::Zero(3);
  for (int i = 0; i < n; ++i) counts[dag_guided_sample(k, g, parents, rng)] += 1.0;
  CHECK(testutil::tv_distance(counts / n, target) < 0.01);
}

TEST_CASE("edge weight is the true normalizer less the factor sum") {
  Rng rng = make_rng(92, 3);
  std::vector<int> cards{2, 3};
  Mat trans = testutil::random_stochastic(rng, 6, 2);
  Mat aux = testutil::perturb_stochastic(rng, trans);
  FiniteJointKernel k = FiniteJointKernel::with_aux(cards, trans, aux);
  VectorPotential g{(Vec(2) << -0.4, 0.6).finished()};

  VectorPotential joint = dag_joint_pullback(k, g);
  Vec pi(6);
  for (int i = 0; i < 6; ++i) pi[i] = 0.05 + draw_uniform(rng);
  pi /= pi.sum();
  std::vector<VectorPotential> f = dag_factorize(cards, joint, pi);

  std::vector<int> parents{1, 2};
  int row = joint_index(cards, parents);
  double norm = 0;
  for (int y = 0; y < 2; ++y) norm += trans(row, y) * std::exp(g.log_values[y]);
  double expect = std::log(norm) - f[0].log_values[1] - f[1].log_values[2];
  CHECK(dag_log_weight(k, g, f, parents) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("single-parent kernel agrees with the plain finite edge") {
  Rng rng = make_rng(92, 4);
  Mat trans = testutil::random_stochastic(rng, 3, 4);
  Mat aux = testutil::perturb_stochastic(rng, trans);
  FiniteJointKernel kj = FiniteJointKernel::with_aux({3}, trans, aux);
  FiniteKernel kf = FiniteKernel::with_aux(trans, aux);
  VectorPotential g{(Vec(4) << 0.1, -0.3, 0.8, -1.5).finished()};

  VectorPotential mj = dag_joint_pullback(kj, g);
  VectorPotential mf = fs_pullback(kf, g);
  for (int i = 0; i < 3; ++i) CHECK(mj.log_values[i] == mf.log_values[i]);

  Rng r1 = make_rng(92, 5), r2 = make_rng(92, 5);
  for (int rep = 0; rep < 50; ++rep) {
    int a = dag_guided_sample(kj, g, {rep % 3}, r1);
    int b = fs_guided_sample(kf, g, rep % 3, r2);
    CHECK(a == b);
  }
}

TEST_CASE("kernel validation") {
  Mat trans = Mat::Constant(4, 2, 0.5);
  CHECK_THROWS_AS(FiniteJointKernel::matched({2, 3}, trans), ValidationError);  // 6 rows needed
  Mat bad = trans;
  bad(0, 0) = -0.1;
  CHECK_THROWS_AS(FiniteJointKernel::matched({2, 2}, bad), ValidationError);
}

}  // TEST_SUITE
