#include <cmath>

#include "bffg/gaussian.hpp"
#include "doctest.h"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace bffg;

namespace {

Vec v1(double a) { return (Vec(1) << a).finished(); }
Mat m1(double a) { return (Mat(1, 1) << a).finished(); }

// log of integral g(y) N(y; mean, var) dy over a generous interval.
double quad_log_integral(const GaussianPotential& g, double mean, double var) {
  double sd = std::sqrt(var);
  double lo = mean - 14 * sd, hi = mean + 14 * sd;
  if (g.info_mat(0, 0) > 1e-12) {
    double gm = g.info_vec[0] / g.info_mat(0, 0);
    double gs = 1.0 / std::sqrt(g.info_mat(0, 0));
    lo = std::min(lo, gm - 14 * gs);
    hi = std::max(hi, gm + 14 * gs);
  }
  auto f = [&](double y) {
    return std::exp(g.log_eval(v1(y)) + oracle::normal_logpdf(y, mean, var));
  };
  return std::log(oracle::quadrature_integral(f, lo, hi, 1e-14));
}

}  // namespace

TEST_SUITE("gaussian") {

TEST_CASE("pullback of the unit-quadratic potential through a standard edge") {
  // y | x ~ N(x, 1), log g(y) = -y^2/2; the transported potential is
  // exp(-log(2)/2 - x^2/4) in closed form.
  GaussianKernel k = GaussianKernel::linear(m1(1.0), v1(0.0), m1(1.0));
  GaussianPotential g{0.0, v1(0.0), m1(1.0)};
  GaussianPotential m = gauss_pullback(k, g);
  CHECK(m.log_scale == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(m.info_vec[0]) <= 1e-12);
  CHECK(m.info_mat(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pullback agrees with quadrature") {
  Rng rng = make_rng(41, 0);
  for (int rep = 0; rep < 5; ++rep) {
    double a = -1.0 + 2.0 * draw_uniform(rng);
    double b = -0.5 + draw_uniform(rng);
    double q = 0.3 + draw_uniform(rng);
    double h = 0.4 + draw_uniform(rng);
    double f = -1.0 + 2.0 * draw_uniform(rng);
    double c = -0.3 + draw_uniform(rng);
    GaussianKernel k = GaussianKernel::linear(m1(a), v1(b), m1(q));
    GaussianPotential g{c, v1(f), m1(h)};
    GaussianPotential msg = gauss_pullback(k, g);
    for (double x : {-1.5, 0.0, 2.0}) {
      double direct = quad_log_integral(g, a * x + b, q);
      CHECK(msg.log_eval(v1(x)) == doctest::Approx(direct).epsilon(1e-9));
    }
  }
}

TEST_CASE("pullback handles a singular quadratic coefficient") {
  // log g(y) = c + f y has no Gaussian factor; the transported value is
  // log int exp(c + f y) N(y; ax+b, q) dy = c + f(ax+b) + f^2 q / 2.
  GaussianKernel k = GaussianKernel::linear(m1(0.7), v1(-0.2), m1(0.9));
  GaussianPotential g{0.4, v1(0.6), m1(0.0)};
  GaussianPotential msg = gauss_pullback(k, g);
  for (double x : {-2.0, 0.3, 1.0}) {
    double mean = 0.7 * x - 0.2;
    double expect = 0.4 + 0.6 * mean + 0.5 * 0.36 * 0.9;
    CHECK(msg.log_eval(v1(x)) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("log_gauss_integral matches quadrature and the linear closed form") {
  GaussianPotential g{-0.2, v1(0.8), m1(1.7)};
  CHECK(log_gauss_integral(g, v1(0.4), m1(0.6)) ==
        doctest::Approx(quad_log_integral(g, 0.4, 0.6)).epsilon(1e-10));
  GaussianPotential lin{0.1, v1(-0.5), m1(0.0)};
  double expect = 0.1 - 0.5 * 0.4 + 0.5 * 0.25 * 0.6;
  CHECK(log_gauss_integral(lin, v1(0.4), m1(0.6)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fusion adds the canonical pieces") {
  GaussianPotential a{-0.1, v1(0.3), m1(1.0)};
  GaussianPotential b{0.4, v1(-0.2), m1(0.5)};
  GaussianPotential c = gauss_fuse(a, b);
  CHECK(c.log_scale == doctest::Approx(0.3));
  CHECK(c.info_vec[0] == doctest::Approx(0.1));
  CHECK(c.info_mat(0, 0) == doctest::Approx(1.5));
}

TEST_CASE("leaf message is the emission density in the parent") {
  Mat A = (Mat(2, 2) << 0.9, 0.1, -0.3, 1.1).finished();
  Vec b = (Vec(2) << 0.2, -0.4).finished();
  Mat Q = (Mat(2, 2) << 0.5, 0.1, 0.1, 0.8).finished();
  GaussianKernel k = GaussianKernel::linear(A, b, Q);
  Vec obs = (Vec(2) << 0.7, -0.1).finished();
  GaussianPotential msg = gauss_leaf_message(k, obs);
  Rng rng = make_rng(42, 0);
  for (int rep = 0; rep < 4; ++rep) {
    Vec x = (Vec(2) << draw_normal(rng), draw_normal(rng)).finished();
    CHECK(msg.log_eval(x) == doctest::Approx(mvn_log_pdf(obs, A * x + b, Q)).epsilon(1e-12));
  }
}

TEST_CASE("two-edge composition matches the marginal emission density") {
  Mat A1 = (Mat(2, 2) << 0.8, 0.2, 0.0, 0.9).finished();
  Vec b1 = (Vec(2) << 0.1, 0.0).finished();
  Mat Q1 = (Mat(2, 2) << 0.4, 0.05, 0.05, 0.3).finished();
  Mat A2 = (Mat(2, 2) << 1.1, -0.2, 0.3, 0.7).finished();
  Vec b2 = (Vec(2) << -0.2, 0.5).finished();
  Mat Q2 = (Mat(2, 2) << 0.6, 0.0, 0.0, 0.9).finished();
  GaussianKernel k1 = GaussianKernel::linear(A1, b1, Q1);
  GaussianKernel k2 = GaussianKernel::linear(A2, b2, Q2);
  Vec obs = (Vec(2) << 0.3, -0.6).finished();

  GaussianPotential msg = gauss_pullback(k1, gauss_leaf_message(k2, obs));
  Vec x0 = (Vec(2) << 0.25, -0.75).finished();
  Vec mean = A2 * (A1 * x0 + b1) + b2;
  Mat cov = A2 * Q1 * A2.transpose() + Q2;
  CHECK(msg.log_eval(x0) == doctest::Approx(mvn_log_pdf(obs, mean, cov)).epsilon(1e-10));
}

TEST_CASE("guided sample hits the tilted posterior in reparametrized form") {
  GaussianKernel k = GaussianKernel::linear(m1(0.8), v1(0.3), m1(0.5));
  GaussianPotential g{0.0, v1(1.2), m1(2.0)};
  double x = -0.4;
  double prior_mean = 0.8 * x + 0.3;
  double prec = 2.0 + 1.0 / 0.5;
  double post_mean = (1.2 + prior_mean / 0.5) / prec;
  Vec y0 = gauss_guided_sample_reparam(k, g, v1(x), v1(0.0));
  CHECK(y0[0] == doctest::Approx(post_mean).epsilon(1e-12));
  Vec y1 = gauss_guided_sample_reparam(k, g, v1(x), v1(1.0));
  CHECK(y1[0] == doctest::Approx(post_mean + 1.0 / std::sqrt(prec)).epsilon(1e-12));

  // rng draw equals the reparametrized draw fed with the same variates
  Rng r1 = make_rng(7, 1), r2 = make_rng(7, 1);
  Vec ys = gauss_guided_sample(k, g, v1(x), r1);
  Vec z = v1(draw_normal(r2));
  CHECK(ys[0] == gauss_guided_sample_reparam(k, g, v1(x), z)[0]);
}

TEST_CASE("matched linear edges carry zero weight") {
  GaussianKernel k = GaussianKernel::linear(m1(0.9), v1(-0.1), m1(0.7));
  GaussianPotential g{-0.3, v1(0.4), m1(1.1)};
  GaussianPotential msg = gauss_pullback(k, g);
  for (double x : {-1.0, 0.0, 0.8})
    CHECK(std::abs(gauss_log_weight(k, g, msg, v1(x))) <= 1e-12);

  Vec obs = v1(0.55);
  GaussianPotential leaf = gauss_leaf_message(k, obs);
  for (double x : {-1.0, 0.6}) CHECK(std::abs(gauss_leaf_log_weight(k, obs, leaf, v1(x))) <= 1e-12);
}

TEST_CASE("tanh-mean edge weight matches the quadrature ratio") {
  // Forward mean tanh(x), comparison straight line through the origin.
  double q = 0.4;
  GaussianKernel k = GaussianKernel::nonlinear(
      [](const Vec& x) -> Vec { return x.array().tanh().matrix(); },
      [q](const Vec&) -> Mat { return m1(q); }, m1(1.0), v1(0.0), m1(q));
  GaussianPotential g{0.2, v1(0.7), m1(0.9)};
  GaussianPotential msg = gauss_pullback(k, g);
  for (double x : {-1.2, 0.3, 1.7}) {
    double num = quad_log_integral(g, std::tanh(x), q);
    double den = quad_log_integral(g, x, q);
    double w = gauss_log_weight(k, g, msg, v1(x));
    CHECK(w == doctest::Approx(num - den).epsilon(1e-6));
    // the message itself is the comparison-kernel transport
    CHECK(msg.log_eval(v1(x)) == doctest::Approx(den).epsilon(1e-8));
  }
}

TEST_CASE("dimension mismatches are rejected") {
  GaussianKernel k = GaussianKernel::linear(m1(1.0), v1(0.0), m1(1.0));
  GaussianPotential g2{0.0, Vec::Zero(2), Mat::Identity(2, 2)};
  CHECK_THROWS_AS(gauss_pullback(k, g2), ValidationError);
  CHECK_THROWS_AS(gauss_leaf_message(k, Vec::Zero(2)), ValidationError);
}

}  // TEST_SUITE
