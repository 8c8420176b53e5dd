#pragma once

// Least-squares fusion primitives for two coupled subsystems whose
// cross-covariance is not tracked: covariance intersection, noise inflation
// for relative measurements, and the modular two-subsystem update.

#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace modfuse {

class FusionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lower clamp on the CI weight. Rank-deficient partner information makes the
/// fused covariance diverge as the weight approaches zero.
inline constexpr double kAlphaMin = 1e-6;

// ---------------------------------------------------------------------------
// Small dense helpers
// ---------------------------------------------------------------------------

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);
bool is_positive_definite(const Eigen::MatrixXd& m);
bool all_finite(const Eigen::MatrixXd& m);

/// Inverse of an SPD matrix via Cholesky; throws FusionError(`what`) if the
/// factorization fails.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const std::string& what);

/// log det of an SPD matrix, +inf if the factorization fails.
double spd_log_det(const Eigen::MatrixXd& m);

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Mean and covariance of one subsystem. The covariance is symmetrized and
/// checked for positive definiteness on construction.
class GaussianEstimate {
 public:
  GaussianEstimate(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  Eigen::Index dim() const { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

/// Measurement value with its (SPD) noise covariance.
class NoisyMeasurement {
 public:
  NoisyMeasurement(Eigen::VectorXd value, Eigen::MatrixXd noise_cov);

  const Eigen::VectorXd& value() const { return value_; }
  const Eigen::MatrixXd& noise_cov() const { return noise_cov_; }
  Eigen::Index dim() const { return value_.size(); }

 private:
  Eigen::VectorXd value_;
  Eigen::MatrixXd noise_cov_;
};

/// Error map h(x1, x2, z) of a measurement relating two subsystems. It is zero
/// when the measurement is exact.
class RelativeMeasurementModel {
 public:
  virtual ~RelativeMeasurementModel() = default;

  virtual Eigen::VectorXd error(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                const Eigen::VectorXd& z) const = 0;
  virtual Eigen::MatrixXd jacobian_x1(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                      const Eigen::VectorXd& z) const = 0;
  virtual Eigen::MatrixXd jacobian_x2(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                      const Eigen::VectorXd& z) const = 0;
};

/// h(x1, x2, z) = z - A1 x1 - A2 x2. With A1 = I and A2 = -I this is the plain
/// relative-position measurement z = x1 - x2.
class AffineRelativeModel final : public RelativeMeasurementModel {
 public:
  AffineRelativeModel(Eigen::MatrixXd a1, Eigen::MatrixXd a2);

  /// z = x1 - x2 for n-dimensional states.
  static AffineRelativeModel difference(Eigen::Index n);

  Eigen::VectorXd error(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                        const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd jacobian_x1(const Eigen::VectorXd&, const Eigen::VectorXd&,
                              const Eigen::VectorXd&) const override {
    return -a1_;
  }
  Eigen::MatrixXd jacobian_x2(const Eigen::VectorXd&, const Eigen::VectorXd&,
                              const Eigen::VectorXd&) const override {
    return -a2_;
  }

 private:
  Eigen::MatrixXd a1_;
  Eigen::MatrixXd a2_;
};

/// Presents `inner` with its two state arguments exchanged.
class SwappedModel final : public RelativeMeasurementModel {
 public:
  explicit SwappedModel(const RelativeMeasurementModel& inner) : inner_(inner) {}

  Eigen::VectorXd error(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                        const Eigen::VectorXd& z) const override {
    return inner_.error(x2, x1, z);
  }
  Eigen::MatrixXd jacobian_x1(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                              const Eigen::VectorXd& z) const override {
    return inner_.jacobian_x2(x2, x1, z);
  }
  Eigen::MatrixXd jacobian_x2(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                              const Eigen::VectorXd& z) const override {
    return inner_.jacobian_x1(x2, x1, z);
  }

 private:
  const RelativeMeasurementModel& inner_;
};

enum class Slot { First = 1, Second = 2 };

/// Which of the two simplifications of the full modular update are active.
///  use_ci_weights = false: weights fixed to 1 (plain least-squares fusion).
///  use_noise_inflation = false: the partner covariance is not used.
struct FusionPolicy {
  bool use_ci_weights = true;
  bool use_noise_inflation = true;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Objective minimized by optimize_alpha: -log det(alpha P^-1 + (1-alpha) info_other).
double alpha_objective(const Eigen::MatrixXd& prior_info, const Eigen::MatrixXd& info_other,
                       double alpha);

/// CI weight in [kAlphaMin, 1] minimizing the determinant of the fused
/// covariance. `info_other` may be singular. Flat objectives resolve to 1.
double optimize_alpha(const Eigen::MatrixXd& prior_cov, const Eigen::MatrixXd& info_other);

struct CiResult {
  GaussianEstimate estimate;
  double alpha;
};

/// Convex combination of the two information matrices at a fixed weight.
GaussianEstimate ci_combine(const GaussianEstimate& a, const GaussianEstimate& b, double alpha);

/// Covariance intersection with the determinant-optimal weight.
CiResult ci_fuse_detailed(const GaussianEstimate& a, const GaussianEstimate& b);
GaussianEstimate ci_fuse(const GaussianEstimate& a, const GaussianEstimate& b);

/// W + H_other P_other H_other^T, with the Jacobian taken at (own_lin, other.mean, z)
/// (arguments placed according to `other_slot`).
Eigen::MatrixXd inflate_noise(const RelativeMeasurementModel& model,
                              const Eigen::VectorXd& own_lin, const GaussianEstimate& other,
                              const NoisyMeasurement& meas, Slot other_slot);

struct ModularUpdate {
  GaussianEstimate estimate;
  double alpha;  // 1 when CI weighting is disabled
};

/// Updates `own` from a relative measurement that also depends on `partner`,
/// without touching `partner` and without a cross-covariance.
ModularUpdate modular_fusion_update_detailed(const GaussianEstimate& own,
                                             const GaussianEstimate& partner,
                                             const NoisyMeasurement& meas,
                                             const RelativeMeasurementModel& model, Slot own_slot,
                                             FusionPolicy policy);
GaussianEstimate modular_fusion_update(const GaussianEstimate& own, const GaussianEstimate& partner,
                                       const NoisyMeasurement& meas,
                                       const RelativeMeasurementModel& model, Slot own_slot,
                                       FusionPolicy policy);

}  // namespace modfuse
