#include "modfuse/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Cholesky>

namespace modfuse {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

bool is_positive_definite(const MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

MatrixXd spd_inverse(const MatrixXd& m, const std::string& what) {
  if (m.rows() != m.cols() || !m.allFinite()) throw FusionError(what);
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw FusionError(what);
  return symmetrized(llt.solve(MatrixXd::Identity(m.rows(), m.cols())));
}

double spd_log_det(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const auto& l = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) return std::numeric_limits<double>::infinity();
    acc += std::log(l(i, i));
  }
  return 2.0 * acc;
}

// ---------------------------------------------------------------------------

GaussianEstimate::GaussianEstimate(VectorXd mean, MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw FusionError("dimension mismatch between mean and covariance");
  if (!mean_.allFinite() || !cov_.allFinite()) throw FusionError("non-finite input");
  cov_ = symmetrized(cov_);
  if (!is_positive_definite(cov_)) throw FusionError("covariance not positive definite");
}

NoisyMeasurement::NoisyMeasurement(VectorXd value, MatrixXd noise_cov)
    : value_(std::move(value)), noise_cov_(std::move(noise_cov)) {
  if (noise_cov_.rows() != value_.size() || noise_cov_.cols() != value_.size())
    throw FusionError("dimension mismatch between measurement and noise covariance");
  if (!value_.allFinite() || !noise_cov_.allFinite()) throw FusionError("non-finite input");
  noise_cov_ = symmetrized(noise_cov_);
  if (!is_positive_definite(noise_cov_))
    throw FusionError("measurement noise covariance not positive definite");
}

AffineRelativeModel::AffineRelativeModel(MatrixXd a1, MatrixXd a2)
    : a1_(std::move(a1)), a2_(std::move(a2)) {
  if (a1_.rows() != a2_.rows()) throw FusionError("dimension mismatch");
}

AffineRelativeModel AffineRelativeModel::difference(Eigen::Index n) {
  return {MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n)};
}

VectorXd AffineRelativeModel::error(const VectorXd& x1, const VectorXd& x2,
                                    const VectorXd& z) const {
  if (x1.size() != a1_.cols() || x2.size() != a2_.cols() || z.size() != a1_.rows())
    throw FusionError("dimension mismatch");
  return z - a1_ * x1 - a2_ * x2;
}

// ---------------------------------------------------------------------------

double alpha_objective(const MatrixXd& prior_info, const MatrixXd& info_other, double alpha) {
  const MatrixXd fused = alpha * prior_info + (1.0 - alpha) * info_other;
  const double ld = spd_log_det(fused);
  if (!std::isfinite(ld)) return std::numeric_limits<double>::infinity();
  return -ld;
}

namespace {

constexpr int kGridPoints = 101;
constexpr double kGoldenWidth = 1e-7;

}  // namespace

double optimize_alpha(const MatrixXd& prior_cov, const MatrixXd& info_other) {
  if (!prior_cov.allFinite() || !info_other.allFinite()) throw FusionError("non-finite input");
  if (prior_cov.rows() != prior_cov.cols() || info_other.rows() != info_other.cols() ||
      prior_cov.rows() != info_other.rows())
    throw FusionError("dimension mismatch");
  const MatrixXd prior_info = spd_inverse(prior_cov, "prior covariance not positive definite");
  const MatrixXd other = symmetrized(info_other);
  auto f = [&](double a) { return alpha_objective(prior_info, other, a); };

  // Coarse scan; ties go to the larger weight.
  double best_f = std::numeric_limits<double>::infinity();
  int best_i = kGridPoints - 1;
  auto grid = [](int i) {
    return i == kGridPoints - 1 ? 1.0 : kAlphaMin + (1.0 - kAlphaMin) * i / (kGridPoints - 1);
  };
  for (int i = 0; i < kGridPoints; ++i) {
    const double v = f(grid(i));
    if (v <= best_f) {
      best_f = v;
      best_i = i;
    }
  }

  // f is convex in alpha, so the minimizer lies between the grid neighbours.
  double lo = grid(best_i > 0 ? best_i - 1 : 0);
  double hi = grid(best_i < kGridPoints - 1 ? best_i + 1 : kGridPoints - 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > kGoldenWidth) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (lo + hi);

  // Candidates in order of preference; a later one must be strictly better.
  const double f_one = f(1.0);
  const double tol = 1e-12 * std::max(1.0, std::abs(f_one));
  double alpha = 1.0;
  double value = f_one;
  for (double cand : {mid, kAlphaMin}) {
    const double v = f(cand);
    if (v < value - tol) {
      alpha = cand;
      value = v;
    }
  }
  return alpha;
}

// ---------------------------------------------------------------------------

GaussianEstimate ci_combine(const GaussianEstimate& a, const GaussianEstimate& b, double alpha) {
  if (a.dim() != b.dim()) throw FusionError("dimension mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw FusionError("weight outside [0, 1]");
  const MatrixXd info_a = spd_inverse(a.cov(), "covariance not positive definite");
  const MatrixXd info_b = spd_inverse(b.cov(), "covariance not positive definite");
  const MatrixXd fused_info = alpha * info_a + (1.0 - alpha) * info_b;
  const MatrixXd cov = spd_inverse(fused_info, "fused information not positive definite");
  VectorXd mean = cov * (alpha * info_a * a.mean() + (1.0 - alpha) * info_b * b.mean());
  return {std::move(mean), cov};
}

CiResult ci_fuse_detailed(const GaussianEstimate& a, const GaussianEstimate& b) {
  if (a.dim() != b.dim()) throw FusionError("dimension mismatch");
  const MatrixXd info_b = spd_inverse(b.cov(), "covariance not positive definite");
  double alpha = optimize_alpha(a.cov(), info_b);
  // Both sides are full rank here, so the boundary alpha = 0 (take b) is admissible.
  if (alpha == kAlphaMin) {
    const MatrixXd info_a = spd_inverse(a.cov(), "covariance not positive definite");
    if (alpha_objective(info_a, info_b, 0.0) < alpha_objective(info_a, info_b, kAlphaMin)) alpha = 0.0;
  }
  return {ci_combine(a, b, alpha), alpha};
}

GaussianEstimate ci_fuse(const GaussianEstimate& a, const GaussianEstimate& b) {
  return ci_fuse_detailed(a, b).estimate;
}

// ---------------------------------------------------------------------------

namespace {

struct Linearization {
  VectorXd residual;
  MatrixXd h1;
  MatrixXd h2;
};

Linearization linearize(const RelativeMeasurementModel& model, const VectorXd& x1,
                        const VectorXd& x2, const VectorXd& z) {
  Linearization lin{model.error(x1, x2, z), model.jacobian_x1(x1, x2, z),
                    model.jacobian_x2(x1, x2, z)};
  if (!lin.residual.allFinite()) throw FusionError("non-finite error map value");
  if (!lin.h1.allFinite() || !lin.h2.allFinite()) throw FusionError("non-finite Jacobian");
  const auto p = z.size();
  if (lin.residual.size() != p || lin.h1.rows() != p || lin.h2.rows() != p ||
      lin.h1.cols() != x1.size() || lin.h2.cols() != x2.size())
    throw FusionError("error map dimensions inconsistent with inputs");
  return lin;
}

}  // namespace

MatrixXd inflate_noise(const RelativeMeasurementModel& model, const VectorXd& own_lin,
                       const GaussianEstimate& other, const NoisyMeasurement& meas,
                       Slot other_slot) {
  const bool other_first = other_slot == Slot::First;
  const VectorXd& x1 = other_first ? other.mean() : own_lin;
  const VectorXd& x2 = other_first ? own_lin : other.mean();
  const Linearization lin = linearize(model, x1, x2, meas.value());
  const MatrixXd& h_other = other_first ? lin.h1 : lin.h2;
  return symmetrized(meas.noise_cov() + h_other * other.cov() * h_other.transpose());
}

ModularUpdate modular_fusion_update_detailed(const GaussianEstimate& own,
                                             const GaussianEstimate& partner,
                                             const NoisyMeasurement& meas,
                                             const RelativeMeasurementModel& model, Slot own_slot,
                                             FusionPolicy policy) {
  const bool own_first = own_slot == Slot::First;
  const VectorXd& x1 = own_first ? own.mean() : partner.mean();
  const VectorXd& x2 = own_first ? partner.mean() : own.mean();
  const Linearization lin = linearize(model, x1, x2, meas.value());
  const MatrixXd& h_own = own_first ? lin.h1 : lin.h2;
  const MatrixXd& h_partner = own_first ? lin.h2 : lin.h1;

  MatrixXd w = meas.noise_cov();
  if (policy.use_noise_inflation)
    w = symmetrized(w + h_partner * partner.cov() * h_partner.transpose());
  const MatrixXd w_inv = spd_inverse(w, "inflated measurement noise not positive definite");
  const MatrixXd info = symmetrized(h_own.transpose() * w_inv * h_own);
  const MatrixXd prior_info = spd_inverse(own.cov(), "prior covariance not positive definite");

  double alpha = 1.0;
  double prior_weight = 1.0;
  double meas_weight = 1.0;
  if (policy.use_ci_weights) {
    alpha = optimize_alpha(own.cov(), info);
    prior_weight = alpha;
    meas_weight = 1.0 - alpha;
  }
  const MatrixXd cov = spd_inverse(prior_weight * prior_info + meas_weight * info,
                                   "fused information matrix not positive definite");
  VectorXd mean = own.mean() - meas_weight * cov * h_own.transpose() * w_inv * lin.residual;
  return {GaussianEstimate(std::move(mean), cov), alpha};
}

GaussianEstimate modular_fusion_update(const GaussianEstimate& own, const GaussianEstimate& partner,
                                       const NoisyMeasurement& meas,
                                       const RelativeMeasurementModel& model, Slot own_slot,
                                       FusionPolicy policy) {
  return modular_fusion_update_detailed(own, partner, meas, model, own_slot, policy).estimate;
}

}  // namespace modfuse
