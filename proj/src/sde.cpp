#include "bffg/sde.hpp"

namespace bffg {

namespace {

constexpr double kDefaultMaxStep = 1e-2;
constexpr double kBlowupNorm = 1e12;

struct OdeState {
  double c;
  Vec F;
  Mat H;
};

OdeState axpy(const OdeState& y, double h, const OdeState& d) {
  return {y.c + h * d.c, y.F + h * d.F, y.H + h * d.H};
}

}  // namespace

SDEKernel SDEKernel::linear(const Mat& lin, const Vec& shift, const Mat& disp, double tau,
                            int steps) {
  SDEKernel k;
  k.dim = static_cast<int>(lin.rows());
  k.wdim = static_cast<int>(disp.cols());
  k.aux_drift_lin = [lin](double) { return lin; };
  k.aux_drift_shift = [shift](double) { return shift; };
  k.aux_dispersion = [disp](double) { return disp; };
  k.drift = [lin, shift](double, const Vec& x) -> Vec { return lin * x + shift; };
  k.dispersion = [disp](double, const Vec&) -> Mat { return disp; };
  k.tau = tau;
  k.steps = steps;
  k.forward_is_aux = true;
  if (tau <= 0) throw ValidationError("sde kernel: edge length must be positive");
  return k;
}

SDEKernel SDEKernel::nonlinear(std::function<Vec(double, const Vec&)> drift,
                               std::function<Mat(double, const Vec&)> dispersion,
                               const Mat& aux_lin, const Vec& aux_shift, const Mat& aux_disp,
                               double tau, int steps) {
  SDEKernel k;
  k.dim = static_cast<int>(aux_lin.rows());
  k.wdim = static_cast<int>(aux_disp.cols());
  k.drift = std::move(drift);
  k.dispersion = std::move(dispersion);
  k.aux_drift_lin = [aux_lin](double) { return aux_lin; };
  k.aux_drift_shift = [aux_shift](double) { return aux_shift; };
  k.aux_dispersion = [aux_disp](double) { return aux_disp; };
  k.tau = tau;
  k.steps = steps;
  if (tau <= 0) throw ValidationError("sde kernel: edge length must be positive");
  return k;
}

int SDEKernel::grid_steps() const {
  if (steps > 0) return steps;
  return static_cast<int>(std::ceil(tau / kDefaultMaxStep));
}

SDEBackward sde_solve_backward(const SDEKernel& k, const GaussianPotential& terminal) {
  if (terminal.dim() != k.dim)
    throw ValidationError("sde_solve_backward: terminal potential dimension mismatch");
  const int m = k.grid_steps();
  const double h = k.tau / m;

  auto deriv = [&](double u, const OdeState& y) -> OdeState {
    Mat B = k.aux_drift_lin(u);
    Vec beta = k.aux_drift_shift(u);
    Mat sig = k.aux_dispersion(u);
    Mat a = sig * sig.transpose();
    Mat HA = y.H * a;
    OdeState d;
    d.H = -B.transpose() * y.H - y.H * B + HA * y.H;
    d.F = -B.transpose() * y.F + HA * y.F + y.H * beta;
    d.c = -beta.dot(y.F) - 0.5 * y.F.dot(a * y.F) + 0.5 * HA.trace();
    return d;
  };

  SDEBackward out;
  out.times.resize(m + 1);
  out.log_scale.resize(m + 1);
  out.info_vec.resize(m + 1);
  out.info_mat.resize(m + 1);
  for (int i = 0; i <= m; ++i) out.times[i] = k.tau * i / m;

  auto rk4_step = [&](double u, double hs, OdeState& y) {
    // classical RK4 with signed step -hs
    OdeState k1 = deriv(u, y);
    OdeState k2 = deriv(u - 0.5 * hs, axpy(y, -0.5 * hs, k1));
    OdeState k3 = deriv(u - 0.5 * hs, axpy(y, -0.5 * hs, k2));
    OdeState k4 = deriv(u - hs, axpy(y, -hs, k3));
    y.c -= hs / 6.0 * (k1.c + 2 * k2.c + 2 * k3.c + k4.c);
    y.F -= hs / 6.0 * (k1.F + 2 * k2.F + 2 * k3.F + k4.F);
    y.H -= hs / 6.0 * (k1.H + 2 * k2.H + 2 * k3.H + k4.H);
    y.H = 0.5 * (y.H + y.H.transpose()).eval();
  };

  OdeState y{terminal.log_scale, terminal.info_vec, terminal.info_mat};
  out.log_scale[m] = y.c;
  out.info_vec[m] = y.F;
  out.info_mat[m] = y.H;
  for (int i = m; i > 0; --i) {
    double u = out.times[i];
    // The quadratic term makes this flow stiff wherever the information
    // matrix is large (tight potentials just behind a leaf), so refine each
    // grid interval until the local step sits inside the explicit stability
    // region.  The boundary layer decays fast; refinement is transient.
    Mat sig = k.aux_dispersion(u);
    double stiffness =
        2.0 * (y.H * (sig * sig.transpose())).norm() + 2.0 * k.aux_drift_lin(u).norm();
    int nsub = std::min(4096, std::max(1, static_cast<int>(std::ceil(h * stiffness))));
    double hs = h / nsub;
    for (int j = 0; j < nsub; ++j) rk4_step(u - j * hs, hs, y);
    if (!y.F.allFinite() || !y.H.allFinite() || !std::isfinite(y.c) ||
        y.H.norm() > kBlowupNorm)
      throw NumericError(
          "sde_solve_backward: backward flow blew up near u=" + std::to_string(u - h) +
          "; the comparison drift is likely unstable over this edge length");
    out.log_scale[i - 1] = y.c;
    out.info_vec[i - 1] = y.F;
    out.info_mat[i - 1] = y.H;
  }
  return out;
}

GaussianPotential sde_message(const SDEBackward& b) { return b.at(0); }

static SDEPath simulate_impl(const SDEKernel& k, const SDEBackward& b, const Vec& x0,
                             const std::vector<Vec>* given, Rng* rng) {
  const int m = k.grid_steps();
  if (static_cast<int>(b.times.size()) != m + 1)
    throw ValidationError("sde_guided_simulate: backward grid does not match the kernel grid");
  if (x0.size() != k.dim) throw ValidationError("sde_guided_simulate: bad initial state");
  SDEPath path;
  path.times = b.times;
  path.states.resize(m + 1);
  path.innovations.resize(m);
  path.states[0] = x0;
  for (int i = 0; i < m; ++i) {
    double u = b.times[i];
    double dt = b.times[i + 1] - b.times[i];
    const Vec& x = path.states[i];
    Vec z;
    if (given) {
      z = (*given)[i];
      if (z.size() != k.wdim)
        throw ValidationError("sde_guided_simulate: innovation dimension mismatch");
    } else {
      z.resize(k.wdim);
      for (int j = 0; j < k.wdim; ++j) z[j] = draw_normal(*rng);
    }
    path.innovations[i] = z;
    Mat sig = k.dispersion(u, x);
    Mat a = sig * sig.transpose();
    // The pull toward the terminal potential, a(F - Hx), is stiff where H is
    // large; treating it implicitly keeps the step stable for any dt * aH
    // while reducing to the explicit update as the product shrinks.
    Vec rhs = x + (k.drift(u, x) + a * b.info_vec[i]) * dt + sig * (std::sqrt(dt) * z);
    Mat lhs = Mat::Identity(k.dim, k.dim) + dt * (a * b.info_mat[i]);
    path.states[i + 1] = lhs.partialPivLu().solve(rhs);
    if (!path.states[i + 1].allFinite())
      throw NumericError("sde_guided_simulate: state became non-finite at u=" +
                         std::to_string(b.times[i + 1]));
  }
  return path;
}

SDEPath sde_guided_simulate(const SDEKernel& k, const SDEBackward& b, const Vec& x0, Rng& rng) {
  return simulate_impl(k, b, x0, nullptr, &rng);
}

SDEPath sde_guided_simulate_reparam(const SDEKernel& k, const SDEBackward& b, const Vec& x0,
                                    const std::vector<Vec>& innovations) {
  if (static_cast<int>(innovations.size()) != k.grid_steps())
    throw ValidationError("sde_guided_simulate: innovation count mismatch");
  return simulate_impl(k, b, x0, &innovations, nullptr);
}

double sde_log_weight(const SDEKernel& k, const SDEBackward& b, const SDEPath& path) {
  const int m = k.grid_steps();
  if (static_cast<int>(path.states.size()) != m + 1)
    throw ValidationError("sde_log_weight: path does not match the kernel grid");
  double total = 0;
  for (int i = 0; i < m; ++i) {
    double u = b.times[i];
    double dt = b.times[i + 1] - b.times[i];
    const Vec& x = path.states[i];
    Vec r = b.info_vec[i] - b.info_mat[i] * x;
    Vec db = k.drift(u, x) - (k.aux_drift_lin(u) * x + k.aux_drift_shift(u));
    Mat sig = k.dispersion(u, x);
    Mat sigt = k.aux_dispersion(u);
    Mat da = sig * sig.transpose() - sigt * sigt.transpose();
    double term = db.dot(r);
    if (da.norm() > 0)
      term += 0.5 * (-(da * b.info_mat[i]).trace() + r.dot(da * r));
    total += term * dt;
  }
  if (!std::isfinite(total))
    throw NumericError("sde_log_weight: non-finite weight along the path");
  return total;
}

}  // namespace bffg
