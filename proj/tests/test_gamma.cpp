#include <cmath>

#include "bffg/gamma.hpp"
#include "doctest.h"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace bffg;

TEST_SUITE("gamma") {

TEST_CASE("pullback accumulates shape and carries rate and anchor") {
  GammaKernel k = GammaKernel::matched(1.7, 2.2);
  GammaPotential g{3.1, 2.2, 5.0};
  GammaPotential m = gamma_pullback(k, g);
  CHECK(m.shape == doctest::Approx(4.8).epsilon(1e-15));
  CHECK(m.rate == 2.2);
  CHECK(m.anchor == 5.0);

  GammaPotential mismatched{3.1, 1.9, 5.0};
  CHECK_THROWS_AS(gamma_pullback(k, mismatched), ValidationError);
  CHECK_THROWS_AS(gamma_fuse(g, g), ValidationError);
}

TEST_CASE("pullback equals the increment convolution") {
  // Transporting the leaf potential through one comparison edge must give
  // exactly the two-increment convolution density.
  GammaKernel k1 = GammaKernel::matched(1.4, 1.8);
  GammaKernel k2 = GammaKernel::matched(2.3, 1.8);
  double obs = 4.0;
  GammaPotential m = gamma_pullback(k1, gamma_leaf_message(k2, obs));
  for (double x : {0.5, 1.5, 3.0}) {
    double gap = obs - x;
    auto f = [&](double u) {
      return std::exp(log_gamma_pdf(u, 1.4, 1.8) + log_gamma_pdf(gap - u, 2.3, 1.8));
    };
    double direct = std::log(oracle::quadrature_integral(f, 0.0, gap, 1e-13));
    CHECK(m.log_eval(x) == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("tilted beta sampler has the right mean") {
  Rng rng = make_rng(70, 0);
  for (double lambda : {-2.0, 0.0, 3.0}) {
    double g1 = 1.6, g2 = 2.4;
    auto density = [&](double z) {
      return std::pow(z, g1 - 1) * std::pow(1 - z, g2 - 1) * std::exp(-lambda * z);
    };
    double norm = oracle::quadrature_integral(density, 0.0, 1.0, 1e-12);
    double mean =
        oracle::quadrature_integral([&](double z) { return z * density(z); }, 0.0, 1.0, 1e-12) /
        norm;
    double var = oracle::quadrature_integral(
                     [&](double z) { return (z - mean) * (z - mean) * density(z); }, 0.0, 1.0,
                     1e-12) /
                 norm;
    const int n = 200000;
    double s = 0;
    for (int i = 0; i < n; ++i) s += expbeta_sample(rng, g1, g2, lambda);
    double se = std::sqrt(var / n);
    CHECK(std::abs(s / n - mean) < 4 * se);
  }
}

TEST_CASE("guided increments stay inside the bracket") {
  Rng rng = make_rng(70, 1);
  GammaKernel k = GammaKernel::state_rate(
      1.3, [](double x) { return 0.8 + 0.3 * x; }, 1.1);
  GammaPotential g{2.0, 1.1, 3.5};
  double x = 1.2;
  for (int i = 0; i < 20000; ++i) {
    double y = gamma_guided_sample(k, g, x, rng);
    CHECK(y > x);
    CHECK(y < g.anchor);
  }
  CHECK_THROWS_AS(gamma_guided_sample(k, g, 3.5, rng), NumericError);
}

TEST_CASE("weight matches the direct integral ratio") {
  GammaKernel k = GammaKernel::state_rate(
      1.6, [](double x) { return 1.9 + 0.5 * std::sin(x); }, 1.3);
  GammaPotential g{2.7, 1.3, 4.2};
  for (double x : {0.3, 1.1, 2.8}) {
    double gap = g.anchor - x;
    double bx = k.rate(x);
    auto f = [&](double u) {
      return std::exp(log_gamma_pdf(u, 1.6, bx) + g.log_eval(x + u));
    };
    double num = std::log(oracle::quadrature_integral(f, 0.0, gap, 1e-13));
    double den = log_gamma_pdf(gap, 1.6 + 2.7, 1.3);
    CHECK(gamma_log_weight(k, g, x) == doctest::Approx(num - den).epsilon(1e-8));
  }
}

TEST_CASE("quadrature and Monte Carlo weight routes agree") {
  GammaKernel k = GammaKernel::state_rate(
      1.4, [](double x) { return 2.1 - 0.2 * x; }, 1.6);
  GammaPotential g{1.9, 1.6, 3.0};
  double x = 0.7;
  double wq = gamma_log_weight(k, g, x);
  Rng rng = make_rng(70, 2);
  double wmc = gamma_log_weight(k, g, x, GammaWeightMethod::MonteCarlo, &rng, 200000);
  CHECK(wmc == doctest::Approx(wq).epsilon(0.01));
  CHECK_THROWS_AS(gamma_log_weight(k, g, x, GammaWeightMethod::MonteCarlo), ValidationError);
}

TEST_CASE("leaf weight compares forward and comparison densities") {
  GammaKernel k = GammaKernel::state_rate(
      2.0, [](double x) { return 1.0 + x; }, 1.5);
  double obs = 2.4, x = 0.9;
  GammaPotential m = gamma_leaf_message(k, obs);
  double expect = log_gamma_pdf(obs - x, 2.0, 1.9) - log_gamma_pdf(obs - x, 2.0, 1.5);
  CHECK(gamma_leaf_log_weight(k, obs, m, x) == doctest::Approx(expect).epsilon(1e-12));
  // matched kernel: zero leaf weight
  GammaKernel km = GammaKernel::matched(2.0, 1.5);
  CHECK(std::abs(gamma_leaf_log_weight(km, obs, gamma_leaf_message(km, obs), x)) <= 1e-14);
}

TEST_CASE("beyond-anchor states have no weight") {
  GammaKernel k = GammaKernel::matched(1.0, 1.0);
  GammaPotential g{1.5, 1.0, 2.0};
  CHECK(gamma_log_weight(k, g, 2.0) == kNegInf);
  CHECK(gamma_log_weight(k, g, 2.5) == kNegInf);
}

}  // TEST_SUITE
