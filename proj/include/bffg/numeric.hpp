#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bffg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/* Thrown when a model or an argument violates a structural precondition.
 * The C API maps this onto its "validation" error code. */
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/* Thrown when an otherwise valid computation breaks down numerically
 * (singular matrix, ODE blow-up, non-finite weight...). */
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(const Vec& v) {
  double m = kNegInf;
  for (int i = 0; i < v.size(); ++i) m = std::max(m, v[i]);
  if (m == kNegInf || !std::isfinite(m)) return m;
  double s = 0;
  for (int i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

inline double log_binom_coeff(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/* log P(X = k), X ~ Binomial(n, p); exact -inf outside the support and at
 * degenerate p. */
inline double log_binom_pmf(int k, int n, double p) {
  if (k < 0 || k > n) return kNegInf;
  if (p <= 0.0) return k == 0 ? 0.0 : kNegInf;
  if (p >= 1.0) return k == n ? 0.0 : kNegInf;
  return log_binom_coeff(n, k) + k * std::log(p) + (n - k) * std::log1p(-p);
}

/* log of the Gamma(shape, rate) density at z (increment density of the
 * subordinator edges). */
inline double log_gamma_pdf(double z, double shape, double rate) {
  if (z <= 0.0) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(z) - rate * z;
}

inline double log_normal_pdf(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * d * d / var;
}

/* Multivariate normal log-density; cov must be symmetric positive definite. */
inline double mvn_log_pdf(const Vec& x, const Vec& mean, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("mvn_log_pdf: covariance not positive definite");
  Vec d = x - mean;
  Vec half = llt.matrixL().solve(d);
  double logdet = 0;
  for (int i = 0; i < cov.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (x.size() * std::log(2.0 * M_PI) + logdet + half.squaredNorm());
}

/* Quadrature rule that approximates an expectation: sum w_i f(x_i) with the
 * weights summing to one. */
struct GaussRule {
  Vec nodes;
  Vec weights;
};

/* Gauss rule for E f(Z), Z ~ Beta(p, q), via the Golub-Welsch eigenvalue
 * method on the monic Jacobi recurrence.  Nodes lie in (0,1); weights are the
 * squared first eigenvector components, so they sum to one and no Beta
 * function evaluation is needed. */
inline GaussRule beta_expectation_rule(int n, double p, double q) {
  if (n < 1 || p <= 0.0 || q <= 0.0)
    throw ValidationError("beta_expectation_rule: need n >= 1, p > 0, q > 0");
  // Jacobi weight (1-x)^a (1+x)^b on [-1,1] matches Beta(p,q) on [0,1]
  // under z = (1+x)/2 with a = q-1, b = p-1.
  double a = q - 1.0, b = p - 1.0;
  Mat J = Mat::Zero(n, n);
  J(0, 0) = (b - a) / (a + b + 2.0);
  for (int k = 1; k < n; ++k) {
    double s = 2.0 * k + a + b;
    J(k, k) = (b * b - a * a) / (s * (s + 2.0));
    double beta_k;
    if (k == 1) {
      // the (k+a+b) factor cancels against (2k+a+b-1); keep the reduced form
      beta_k = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b) * (2.0 + a + b) * (3.0 + a + b));
    } else {
      beta_k = 4.0 * k * (k + a) * (k + b) * (k + a + b) /
               (s * s * (s + 1.0) * (s - 1.0));
    }
    J(k, k - 1) = J(k - 1, k) = std::sqrt(beta_k);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  if (es.info() != Eigen::Success)
    throw NumericError("beta_expectation_rule: eigen decomposition failed");
  GaussRule rule;
  rule.nodes = (es.eigenvalues().array() + 1.0) / 2.0;
  rule.weights = es.eigenvectors().row(0).array().square();
  return rule;
}

/* Gauss-Legendre rule on [0,1] normalized as an average: sum w_i f(x_i)
 * approximates the mean of f over [0,1] (multiply by the interval length to
 * integrate). */
inline GaussRule legendre_average_rule(int n) { return beta_expectation_rule(n, 1.0, 1.0); }

}  // namespace bffg
