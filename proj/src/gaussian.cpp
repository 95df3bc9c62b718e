#include "bffg/gaussian.hpp"

namespace bffg {

namespace {

constexpr double kCondLimit = 1e8;

struct Spectrum {
  double min_eig = 0;
  double max_eig = 0;
  bool well_conditioned() const {
    return min_eig > 0 && max_eig / min_eig < kCondLimit;
  }
};

Spectrum spectrum(const Mat& H) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("gaussian: eigenvalue solve failed");
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

Mat symmetrized(const Mat& A) { return 0.5 * (A + A.transpose()); }

double log_det_lu(const Mat& A) {
  Eigen::PartialPivLU<Mat> lu(A);
  double s = 0;
  for (int i = 0; i < A.rows(); ++i) s += std::log(std::abs(lu.matrixLU()(i, i)));
  return s;
}

Mat pd_inverse(const Mat& A, const char* what) {
  Eigen::LLT<Mat> llt(A);
  if (llt.info() != Eigen::Success)
    throw NumericError(std::string("gaussian: ") + what + " not positive definite");
  return llt.solve(Mat::Identity(A.rows(), A.cols()));
}

/* Shared core of pullback / integral evaluation.  Computes the transported
 * quadratic pieces and the log normalization for the kernel y|x ~ N(lin x +
 * shift, cov) acting on g.  When lin is empty only the scalar is produced
 * (that is the integral of g against N(shift, cov)). */
struct Transported {
  double log_scale;
  Vec info_vec;
  Mat info_mat;
};

Transported transport(const GaussianPotential& g, const Mat* lin, const Vec& shift,
                      const Mat& cov) {
  const int d = g.dim();
  if (shift.size() != d || cov.rows() != d || cov.cols() != d)
    throw ValidationError("gaussian: dimension mismatch between potential and kernel");
  const Mat& H = g.info_mat;
  const Vec& F = g.info_vec;
  Spectrum sp = spectrum(H);
  Transported out;
  if (sp.well_conditioned()) {
    Eigen::LLT<Mat> hllt(H);
    if (hllt.info() != Eigen::Success)
      throw NumericError("gaussian: quadratic coefficient not positive definite");
    Vec m = hllt.solve(F);
    Mat C = cov + hllt.solve(Mat::Identity(d, d));
    Eigen::LLT<Mat> cllt(C);
    if (cllt.info() != Eigen::Success)
      throw NumericError("gaussian: transported covariance not positive definite");
    double logdet_h = 0, logdet_c = 0;
    for (int i = 0; i < d; ++i) {
      logdet_h += 2.0 * std::log(hllt.matrixL()(i, i));
      logdet_c += 2.0 * std::log(cllt.matrixL()(i, i));
    }
    // log of canonical normal at zero, and of N(m, C) at shift
    double log_can0 = -0.5 * d * std::log(2.0 * M_PI) + 0.5 * logdet_h - 0.5 * F.dot(m);
    Vec diff = shift - m;
    Vec half = cllt.matrixL().solve(diff);
    double log_phi = -0.5 * d * std::log(2.0 * M_PI) - 0.5 * logdet_c - 0.5 * half.squaredNorm();
    out.log_scale = g.log_scale - log_can0 + log_phi;
    if (lin) {
      Mat Cinv_lin = cllt.solve(*lin);
      out.info_mat = symmetrized(lin->transpose() * Cinv_lin);
      out.info_vec = lin->transpose() * cllt.solve(m - shift);
    }
  } else {
    // Inversion-avoiding route through (cov H + I); valid for singular or
    // badly conditioned H as long as cov is positive definite.
    if (sp.min_eig < -1e-9 * std::max(1.0, sp.max_eig))
      throw NumericError(
          "gaussian: quadratic coefficient indefinite (min eigenvalue " +
          std::to_string(sp.min_eig) + ")");
    Mat QHI = cov * H + Mat::Identity(d, d);
    Eigen::PartialPivLU<Mat> lu(QHI);
    Mat G = lu.solve(Mat::Identity(d, d));
    Mat HG = symmetrized(H * G);  // = (cov + H^-1)^-1 without forming H^-1
    Mat cov_inv = pd_inverse(cov, "kernel covariance (needed for the singular route)");
    Eigen::LLT<Mat> hq(symmetrized(H + cov_inv));
    if (hq.info() != Eigen::Success)
      throw NumericError("gaussian: H + cov^-1 not positive definite");
    Vec GF = G * F;
    out.log_scale = g.log_scale - 0.5 * log_det_lu(QHI) - 0.5 * shift.dot(HG * shift) +
                    shift.dot(GF) + 0.5 * F.dot(hq.solve(F));
    if (lin) {
      out.info_mat = symmetrized(lin->transpose() * HG * (*lin));
      out.info_vec = lin->transpose() * (GF - HG * shift);
    }
  }
  return out;
}

}  // namespace

GaussianKernel GaussianKernel::linear(const Mat& lin, const Vec& shift, const Mat& cov) {
  GaussianKernel k;
  k.dim_in = static_cast<int>(lin.cols());
  k.dim_out = static_cast<int>(lin.rows());
  k.aux_lin = lin;
  k.aux_shift = shift;
  k.aux_cov = cov;
  k.mean = [lin, shift](const Vec& x) -> Vec { return lin * x + shift; };
  k.cov = [cov](const Vec&) -> Mat { return cov; };
  k.forward_linear = true;
  return k;
}

GaussianKernel GaussianKernel::nonlinear(std::function<Vec(const Vec&)> mean,
                                         std::function<Mat(const Vec&)> cov, const Mat& aux_lin,
                                         const Vec& aux_shift, const Mat& aux_cov) {
  GaussianKernel k;
  k.dim_in = static_cast<int>(aux_lin.cols());
  k.dim_out = static_cast<int>(aux_lin.rows());
  k.mean = std::move(mean);
  k.cov = std::move(cov);
  k.aux_lin = aux_lin;
  k.aux_shift = aux_shift;
  k.aux_cov = aux_cov;
  k.forward_linear = false;
  return k;
}

double log_gauss_integral(const GaussianPotential& g, const Vec& m, const Mat& S) {
  return transport(g, nullptr, m, S).log_scale;
}

GaussianPotential gauss_pullback(const GaussianKernel& k, const GaussianPotential& g) {
  if (g.dim() != k.dim_out)
    throw ValidationError("gauss_pullback: potential dimension does not match kernel output");
  Transported t = transport(g, &k.aux_lin, k.aux_shift, k.aux_cov);
  return {t.log_scale, t.info_vec, t.info_mat};
}

GaussianPotential gauss_fuse(const GaussianPotential& a, const GaussianPotential& b) {
  if (a.dim() != b.dim()) throw ValidationError("gauss_fuse: dimension mismatch");
  return {a.log_scale + b.log_scale, a.info_vec + b.info_vec, a.info_mat + b.info_mat};
}

GaussianPotential gauss_leaf_message(const GaussianKernel& k, const Vec& obs) {
  if (obs.size() != k.dim_out)
    throw ValidationError("gauss_leaf_message: observation dimension mismatch");
  Mat Qinv = pd_inverse(k.aux_cov, "leaf emission covariance");
  GaussianPotential g;
  g.log_scale = mvn_log_pdf(obs, k.aux_shift, k.aux_cov);
  g.info_vec = k.aux_lin.transpose() * (Qinv * (obs - k.aux_shift));
  g.info_mat = symmetrized(k.aux_lin.transpose() * Qinv * k.aux_lin);
  return g;
}

namespace {

/* Canonical-form draw: precision P, potential vector b, sample N(P^-1 b, P^-1)
 * as mean + L^-T z with P = L L'. */
Vec canonical_sample(const Mat& P, const Vec& b, const Vec& z) {
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success)
    throw NumericError("gaussian: guided precision not positive definite");
  Vec mean = llt.solve(b);
  return mean + llt.matrixU().solve(z);
}

}  // namespace

Vec gauss_guided_sample(const GaussianKernel& k, const GaussianPotential& g, const Vec& x,
                        Rng& rng) {
  Vec z(k.dim_out);
  for (int i = 0; i < z.size(); ++i) z[i] = draw_normal(rng);
  return gauss_guided_sample_reparam(k, g, x, z);
}

Vec gauss_guided_sample_reparam(const GaussianKernel& k, const GaussianPotential& g,
                                const Vec& x, const Vec& z) {
  if (g.dim() != k.dim_out)
    throw ValidationError("gauss_guided_sample: potential dimension mismatch");
  Mat Qx = k.cov(x);
  Mat Qx_inv = pd_inverse(Qx, "forward covariance");
  Mat P = symmetrized(g.info_mat + Qx_inv);
  Vec b = g.info_vec + Qx_inv * k.mean(x);
  return canonical_sample(P, b, z);
}

double gauss_log_weight(const GaussianKernel& k, const GaussianPotential& g,
                        const GaussianPotential& message, const Vec& x) {
  double num = log_gauss_integral(g, k.mean(x), k.cov(x));
  return num - message.log_eval(x);
}

double gauss_leaf_log_weight(const GaussianKernel& k, const Vec& obs,
                             const GaussianPotential& message, const Vec& x) {
  double num = mvn_log_pdf(obs, k.mean(x), k.cov(x));
  return num - message.log_eval(x);
}

}  // namespace bffg
