#pragma once

// Planar robot (x, y, theta) and a stationary landmark observed by bearing.
// Provides the unicycle EKF for the robot, the two modular bearing updates
// (landmark side and robot side), and the joint 5-state filter used as the
// non-modular baseline.

#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "modfuse/core.hpp"

namespace modfuse {

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Matrix5d = Eigen::Matrix<double, 5, 5>;
using Matrix23d = Eigen::Matrix<double, 2, 3>;
using Matrix25d = Eigen::Matrix<double, 2, 5>;
using Matrix32d = Eigen::Matrix<double, 3, 2>;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

struct RobotPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Eigen::Vector3d vector() const { return {x, y, theta}; }
  Eigen::Vector2d position() const { return {x, y}; }
  static RobotPose from_vector(const Eigen::Vector3d& v) { return {v(0), v(1), wrap_angle(v(2))}; }

  bool operator==(const RobotPose&) const = default;
};

struct Twist {
  double v = 0.0;  // m/s
  double w = 0.0;  // rad/s
};

struct TwistNoise {
  double sigma_v = 0.0;
  double sigma_w = 0.0;

  bool operator==(const TwistNoise&) const = default;
};

struct RobotEstimate {
  RobotPose pose;
  Eigen::Matrix3d cov;
};

struct LandmarkEstimate {
  Eigen::Vector2d position;
  Eigen::Matrix2d cov;
};

/// Full-state robot fix (GPS position + compass heading).
struct PoseMeasurement {
  Eigen::Vector3d value;
  Eigen::Matrix3d cov;
};

struct BearingMeasurement {
  double angle = 0.0;  // body frame, rad
  double sigma = 0.0;  // rad

  Eigen::Vector2d direction() const;
};

/// State ordering [x_r, y_r, theta_r, x_l, y_l].
struct JointEstimate {
  Vector5d state;
  Matrix5d cov;

  RobotPose pose() const { return {state(0), state(1), state(2)}; }
  Eigen::Vector2d landmark() const { return state.tail<2>(); }
};

/// Quantities shared by the modular bearing updates.
struct BearingGeometry {
  Eigen::Vector2d z;        // measured direction, body frame
  Eigen::Vector2d z_perp;   // z rotated by +90 degrees
  Eigen::Vector2d z_tilde;  // z_perp expressed in the world frame
  Matrix23d u_r;            // d(p_l - p_r rotated)/dX_r, before the body rotation
  double gamma_r = 0.0;     // robot uncertainty projected on z_tilde
  double gamma_l = 0.0;     // landmark uncertainty projected on z_tilde
};

enum class MethodVariant { Joint, FSafe, FKalman, Safe, Kalman };

inline constexpr MethodVariant kAllMethods[] = {MethodVariant::Joint, MethodVariant::FSafe,
                                                MethodVariant::FKalman, MethodVariant::Safe,
                                                MethodVariant::Kalman};

std::string_view method_name(MethodVariant m);
std::optional<MethodVariant> parse_method(std::string_view name);

/// Fusion policy of a modular variant. Throws for Joint.
FusionPolicy policy_for(MethodVariant m);

/// Bearing updates closer than this (estimated robot-landmark range, m) are skipped.
inline constexpr double kMinBearingRange = 1e-6;

// ---------------------------------------------------------------------------
// Robot model and filter
// ---------------------------------------------------------------------------

RobotPose unicycle_step(const RobotPose& pose, const Twist& twist, double tau);

/// d f / d X at (pose, twist).
Eigen::Matrix3d unicycle_state_jacobian(const RobotPose& pose, const Twist& twist, double tau);
/// d f / d u at pose.
Matrix32d unicycle_input_jacobian(const RobotPose& pose, double tau);

RobotEstimate ekf_predict(const RobotEstimate& est, const Twist& measured, const TwistNoise& noise,
                          double tau);

RobotEstimate gps_compass_update(const RobotEstimate& est, const PoseMeasurement& meas);

// ---------------------------------------------------------------------------
// Bearing measurement
// ---------------------------------------------------------------------------

/// Bearing of `landmark` in the body frame of `pose`.
double true_bearing(const RobotPose& pose, const Eigen::Vector2d& landmark);

BearingGeometry bearing_geometry(double z_angle, const RobotEstimate& robot,
                                 const LandmarkEstimate& lm);

/// h(X_r, p_l, z) = (I - z z^T) R(theta)^T (p_l - p_r) with z = [cos, sin] of the
/// measured bearing. Noise covariance is sigma^2 I.
class BearingErrorModel final : public RelativeMeasurementModel {
 public:
  Eigen::VectorXd error(const Eigen::VectorXd& robot, const Eigen::VectorXd& landmark,
                        const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd jacobian_x1(const Eigen::VectorXd& robot, const Eigen::VectorXd& landmark,
                              const Eigen::VectorXd& z) const override;
  Eigen::MatrixXd jacobian_x2(const Eigen::VectorXd& robot, const Eigen::VectorXd& landmark,
                              const Eigen::VectorXd& z) const override;

  static NoisyMeasurement measurement(const BearingMeasurement& b);
};

struct LandmarkUpdate {
  LandmarkEstimate estimate;
  double alpha = 1.0;
  bool skipped = false;
};

struct RobotUpdate {
  RobotEstimate estimate;
  double alpha = 1.0;
  bool skipped = false;
};

/// Landmark side of the modular bearing fusion (rank-1 closed form).
LandmarkUpdate landmark_bearing_update_detailed(const LandmarkEstimate& lm,
                                                const RobotEstimate& robot,
                                                const BearingMeasurement& meas,
                                                MethodVariant variant);
LandmarkEstimate landmark_bearing_update(const LandmarkEstimate& lm, const RobotEstimate& robot,
                                         const BearingMeasurement& meas, MethodVariant variant);

/// Robot side of the modular bearing fusion (rank-1 closed form).
RobotUpdate robot_bearing_update_detailed(const RobotEstimate& robot, const LandmarkEstimate& lm,
                                          const BearingMeasurement& meas, MethodVariant variant);
RobotEstimate robot_bearing_update(const RobotEstimate& robot, const LandmarkEstimate& lm,
                                   const BearingMeasurement& meas, MethodVariant variant);

// ---------------------------------------------------------------------------
// Joint baseline
// ---------------------------------------------------------------------------

JointEstimate joint_predict(const JointEstimate& est, const Twist& measured,
                            const TwistNoise& noise, double tau);

JointEstimate joint_gps_update(const JointEstimate& est, const PoseMeasurement& meas);

/// 2x5 matrix U with h = R^T z_tilde z_tilde^T U (X - X_hat) to first order.
Matrix25d joint_bearing_projection(const JointEstimate& est);

JointEstimate joint_bearing_update(const JointEstimate& est, const BearingMeasurement& meas);

}  // namespace modfuse
