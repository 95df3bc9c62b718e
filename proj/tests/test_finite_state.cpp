#include <cmath>

#include "bffg/finite_state.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bffg;

namespace {

// Dense reference for the backward transport, no zero-skipping tricks.
Vec dense_pullback(const Mat& k, const Vec& log_g) {
  Vec out(k.rows());
  for (int i = 0; i < k.rows(); ++i) {
    double s = 0;
    for (int j = 0; j < k.cols(); ++j)
      if (log_g[j] != kNegInf) s += k(i, j) * std::exp(log_g[j]);
    out[i] = s > 0 ? std::log(s) : kNegInf;
  }
  return out;
}

}  // namespace

TEST_SUITE("finite_state") {

TEST_CASE("pullback matches dense summation") {
  Rng rng = make_rng(50, 0);
  Mat k = testutil::random_stochastic(rng, 4, 3);
  VectorPotential g{(Vec(3) << -0.4, kNegInf, 0.7).finished()};
  VectorPotential m = fs_pullback(FiniteKernel::matched(k), g);
  Vec expect = dense_pullback(k, g.log_values);
  for (int i = 0; i < 4; ++i) CHECK(m.log_values[i] == doctest::Approx(expect[i]).epsilon(1e-13));

  // comparison kernel drives the transport, not the forward kernel
  Mat aux = testutil::perturb_stochastic(rng, k);
  VectorPotential ma = fs_pullback(FiniteKernel::with_aux(k, aux), g);
  Vec expect_aux = dense_pullback(aux, g.log_values);
  for (int i = 0; i < 4; ++i)
    CHECK(ma.log_values[i] == doctest::Approx(expect_aux[i]).epsilon(1e-13));
}

TEST_CASE("unit and leaf messages") {
  VectorPotential u = fs_unit(1, 3);
  CHECK(u.log_values[0] == kNegInf);
  CHECK(u.log_values[1] == 0.0);
  CHECK(u.log_values[2] == kNegInf);
  CHECK_THROWS_AS(fs_unit(3, 3), ValidationError);

  Rng rng = make_rng(50, 1);
  Mat k = testutil::random_stochastic(rng, 3, 4);
  FiniteKernel fk = FiniteKernel::matched(k);
  VectorPotential m = fs_leaf_message(fk, 2);
  for (int x = 0; x < 3; ++x) CHECK(m.log_values[x] == doctest::Approx(std::log(k(x, 2))));
  // identical to transporting the unit potential
  VectorPotential via_unit = fs_pullback(fk, fs_unit(2, 4));
  for (int x = 0; x < 3; ++x) CHECK(m.log_values[x] == via_unit.log_values[x]);
}

TEST_CASE("guided pmf and weights") {
  Rng rng = make_rng(50, 2);
  Mat k = testutil::random_stochastic(rng, 3, 3);
  Mat aux = testutil::perturb_stochastic(rng, k);
  FiniteKernel fk = FiniteKernel::with_aux(k, aux);
  VectorPotential g{(Vec(3) << -0.2, -1.0, 0.4).finished()};
  VectorPotential msg = fs_pullback(fk, g);

  for (int x = 0; x < 3; ++x) {
    Vec pmf = fs_guided_pmf(fk, g, x);
    CHECK(pmf.sum() == doctest::Approx(1.0).epsilon(1e-12));
    double norm = 0;
    for (int j = 0; j < 3; ++j) norm += k(x, j) * std::exp(g.log_values[j]);
    for (int j = 0; j < 3; ++j)
      CHECK(pmf[j] == doctest::Approx(k(x, j) * std::exp(g.log_values[j]) / norm));
    CHECK(fs_log_weight(fk, g, msg, x) ==
          doctest::Approx(std::log(norm) - msg.log_values[x]).epsilon(1e-12));
  }

  // matched comparison kernel: weights vanish identically
  FiniteKernel matched = FiniteKernel::matched(k);
  VectorPotential mm = fs_pullback(matched, g);
  for (int x = 0; x < 3; ++x) CHECK(std::abs(fs_log_weight(matched, g, mm, x)) <= 1e-14);
  VectorPotential lm = fs_leaf_message(matched, 1);
  for (int x = 0; x < 3; ++x) CHECK(std::abs(fs_leaf_log_weight(matched, 1, lm, x)) <= 1e-14);
}

TEST_CASE("guided sampling follows the guided pmf") {
  Rng rng = make_rng(50, 3);
  Mat k = testutil::random_stochastic(rng, 3, 4);
  FiniteKernel fk = FiniteKernel::matched(k);
  VectorPotential g{(Vec(4) << 0.3, -0.8, kNegInf, 0.1).finished()};
  Vec pmf = fs_guided_pmf(fk, g, 1);
  Vec counts = Vec::Zero(4);
  const int n = 200000;
  for (int i = 0; i < n; ++i) counts[fs_guided_sample(fk, g, 1, rng)] += 1.0;
  CHECK(testutil::tv_distance(counts / n, pmf) < 0.01);
  CHECK(counts[2] == 0.0);  // impossible under the potential
}

TEST_CASE("particle transport factorizes exactly") {
  // two particles on 2 and 3 states; joint enumeration against the
  // per-particle backward factors
  Rng rng = make_rng(50, 4);
  ParticleKernel pk;
  pk.particles = 2;
  pk.states = 3;
  Mat a0 = testutil::random_stochastic(rng, 3, 3);
  Mat a1 = testutil::random_stochastic(rng, 3, 3);
  pk.aux_trans = {a0, a1};
  // forward kernel: particle i mixes its own row with the other particle's
  // current state, so it genuinely depends on the full configuration
  pk.trans = [a0, a1](int i, const std::vector<int>& x) -> Mat {
    const Mat& base = i == 0 ? a0 : a1;
    Mat out = base;
    int other = x[1 - i];
    for (int r = 0; r < out.rows(); ++r) {
      out(r, other) += 0.3;
      out.row(r) /= out.row(r).sum();
    }
    return out;
  };

  ParticlePotential g;
  g.log_values = {(Vec(3) << -0.1, -0.9, 0.2).finished(),
                  (Vec(3) << 0.4, kNegInf, -0.5).finished()};
  ParticlePotential m = particle_pullback(pk, g);
  REQUIRE(m.particles() == 2);

  for (int x0 = 0; x0 < 3; ++x0)
    for (int x1 = 0; x1 < 3; ++x1) {
      double joint = 0;
      for (int y0 = 0; y0 < 3; ++y0)
        for (int y1 = 0; y1 < 3; ++y1)
          joint += a0(x0, y0) * a1(x1, y1) *
                   std::exp(g.log_values[0][y0] + g.log_values[1][y1]);
      std::vector<int> x{x0, x1};
      CHECK(m.log_eval(x) == doctest::Approx(std::log(joint)).epsilon(1e-12));
    }
}

TEST_CASE("particle weight corrects the configuration-dependent kernel") {
  Rng rng = make_rng(50, 5);
  ParticleKernel pk;
  pk.particles = 2;
  pk.states = 2;
  Mat a0 = testutil::random_stochastic(rng, 2, 2);
  Mat a1 = testutil::random_stochastic(rng, 2, 2);
  pk.aux_trans = {a0, a1};
  pk.trans = [a0, a1](int i, const std::vector<int>& x) -> Mat {
    Mat out = i == 0 ? a0 : a1;
    // deterministic tilt: push toward state 0 when the particles agree
    if (x[0] == x[1]) {
      for (int r = 0; r < 2; ++r) {
        out(r, 0) += 0.25;
        out.row(r) /= out.row(r).sum();
      }
    }
    return out;
  };

  ParticlePotential g;
  g.log_values = {(Vec(2) << -0.3, 0.2).finished(), (Vec(2) << 0.5, -0.7).finished()};
  ParticlePotential msg = particle_pullback(pk, g);

  for (int x0 = 0; x0 < 2; ++x0)
    for (int x1 = 0; x1 < 2; ++x1) {
      std::vector<int> x{x0, x1};
      Mat k0 = pk.trans(0, x), k1 = pk.trans(1, x);
      double num = 0;
      for (int y0 = 0; y0 < 2; ++y0)
        for (int y1 = 0; y1 < 2; ++y1)
          num += k0(x0, y0) * k1(x1, y1) *
                 std::exp(g.log_values[0][y0] + g.log_values[1][y1]);
      double den = msg.log_values[0][x0] + msg.log_values[1][x1];
      CHECK(particle_log_weight(pk, g, msg, x) ==
            doctest::Approx(std::log(num) - den).epsilon(1e-12));
    }
}

TEST_CASE("particle guided sampling matches the enumerated law") {
  Rng rng = make_rng(50, 6);
  ParticleKernel pk;
  pk.particles = 2;
  pk.states = 2;
  Mat a0 = testutil::random_stochastic(rng, 2, 2);
  Mat a1 = testutil::random_stochastic(rng, 2, 2);
  pk.aux_trans = {a0, a1};
  pk.trans = [a0, a1](int i, const std::vector<int>&) -> Mat { return i == 0 ? a0 : a1; };

  ParticlePotential g;
  g.log_values = {(Vec(2) << -0.3, 0.6).finished(), (Vec(2) << 0.1, -1.2).finished()};
  std::vector<int> x{1, 0};

  // target law: per-particle tilted rows (the kernels are state independent)
  Vec pmf = Vec::Zero(4);
  for (int y0 = 0; y0 < 2; ++y0)
    for (int y1 = 0; y1 < 2; ++y1)
      pmf[2 * y0 + y1] = a0(1, y0) * std::exp(g.log_values[0][y0]) * a1(0, y1) *
                         std::exp(g.log_values[1][y1]);
  pmf /= pmf.sum();

  Vec counts = Vec::Zero(4);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    auto y = particle_guided_sample(pk, g, x, rng);
    counts[2 * y[0] + y[1]] += 1.0;
  }
  CHECK(testutil::tv_distance(counts / n, pmf) < 0.01);
}

TEST_CASE("particle leaf message and weight") {
  ParticleObsKernel ok = ParticleObsKernel::matched(
      {(Mat(2, 2) << 0.9, 0.1, 0.2, 0.8).finished(),
       (Mat(2, 2) << 0.7, 0.3, 0.4, 0.6).finished()});
  std::vector<int> obs{1, 0};
  ParticlePotential msg = particle_leaf_message(ok, obs);
  CHECK(msg.log_values[0][0] == doctest::Approx(std::log(0.1)));
  CHECK(msg.log_values[0][1] == doctest::Approx(std::log(0.8)));
  CHECK(msg.log_values[1][0] == doctest::Approx(std::log(0.7)));
  CHECK(msg.log_values[1][1] == doctest::Approx(std::log(0.4)));
  std::vector<int> x{0, 1};
  CHECK(std::abs(particle_leaf_log_weight(ok, obs, msg, x)) <= 1e-14);
}

TEST_CASE("stochasticity validation") {
  Mat bad = (Mat(2, 2) << 0.7, 0.2, 0.5, 0.5).finished();  // first row sums to 0.9
  CHECK_THROWS_AS(FiniteKernel::matched(bad), ValidationError);
  Mat neg = (Mat(2, 2) << 1.2, -0.2, 0.5, 0.5).finished();
  CHECK_THROWS_AS(FiniteKernel::matched(neg), ValidationError);
}

}  // TEST_SUITE
