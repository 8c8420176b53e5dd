#include "modfuse/robot_landmark.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace modfuse {

using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

Vector2d BearingMeasurement::direction() const { return {std::cos(angle), std::sin(angle)}; }

std::string_view method_name(MethodVariant m) {
  switch (m) {
    case MethodVariant::Joint: return "joint";
    case MethodVariant::FSafe: return "fsafe";
    case MethodVariant::FKalman: return "fkalman";
    case MethodVariant::Safe: return "safe";
    case MethodVariant::Kalman: return "kalman";
  }
  return "unknown";
}

std::optional<MethodVariant> parse_method(std::string_view name) {
  for (MethodVariant m : kAllMethods)
    if (method_name(m) == name) return m;
  return std::nullopt;
}

FusionPolicy policy_for(MethodVariant m) {
  switch (m) {
    case MethodVariant::FSafe: return {true, true};
    case MethodVariant::FKalman: return {false, true};
    case MethodVariant::Safe: return {true, false};
    case MethodVariant::Kalman: return {false, false};
    case MethodVariant::Joint: break;
  }
  throw FusionError("the joint method has no modular fusion policy");
}

namespace {

Matrix2d rotation(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Matrix2d r;
  r << c, -s, s, c;
  return r;
}

template <typename Derived>
void require_pd(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw FusionError(what);
  Eigen::LLT<typename Derived::PlainObject> llt(m);
  if (llt.info() != Eigen::Success) throw FusionError(what);
}

template <typename Derived>
typename Derived::PlainObject sym(const Eigen::MatrixBase<Derived>& m) {
  return 0.5 * (m + m.transpose());
}

// Symmetrized covariance that still passes a Cholesky test. `scale` is the norm
// of the inputs the matrix was computed from, which sets the size of its
// rounding error. If rounding alone broke positive definiteness (near-noiseless
// measurements collapse a direction by many orders of magnitude), eigenvalues
// are raised to a floor at that scale; anything larger is reported.
constexpr double kEigenFloor = 1e-12;
constexpr double kRoundoffSlack = 1e-9;

template <typename Derived>
typename Derived::PlainObject conditioned(const Eigen::MatrixBase<Derived>& m, double scale,
                                          const char* what) {
  using Mat = typename Derived::PlainObject;
  Mat p = sym(m);
  if (!p.allFinite() || !std::isfinite(scale)) throw FusionError(what);
  if (Eigen::LLT<Mat>(p).info() == Eigen::Success) return p;
  scale = std::max(scale, p.norm());
  const Eigen::SelfAdjointEigenSolver<Mat> es(p);
  const auto& eig = es.eigenvalues();
  if (!(scale > 0.0) || eig.minCoeff() < -kRoundoffSlack * scale) throw FusionError(what);
  const auto floored = eig.cwiseMax(kEigenFloor * scale);
  return sym(es.eigenvectors() * floored.asDiagonal() * es.eigenvectors().transpose());
}

void require_finite_pose(const RobotPose& p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.theta))
    throw FusionError("non-finite input");
}

void require_valid_bearing(const BearingMeasurement& m) {
  if (!std::isfinite(m.angle) || !(m.sigma > 0.0) || !std::isfinite(m.sigma))
    throw FusionError("bearing measurement requires finite angle and sigma > 0");
}

Matrix23d robot_projection(const Vector2d& robot_pos, const Vector2d& lm_pos) {
  const Vector2d d = lm_pos - robot_pos;
  Matrix23d u;
  u << -1.0, 0.0, d.y(), 0.0, -1.0, -d.x();
  return u;
}

// (a P^-1 + b m m^T / s)^-1 = (P - b P m m^T P / (a s + b m^T P m)) / a and
// the gain b P m / (a s + b m^T P m), computed without forming inverses. The
// subtracted term never exceeds P, so roundoff stays at the scale of P even
// when s is tiny or P is badly conditioned.
template <int N>
struct RankOneFusion {
  Eigen::Matrix<double, N, N> cov;
  Eigen::Matrix<double, N, 1> gain;
};

template <int N>
RankOneFusion<N> rank_one_fusion(const Eigen::Matrix<double, N, N>& p,
                                 const Eigen::Matrix<double, N, 1>& m, double s, double a,
                                 double b) {
  const Eigen::Matrix<double, N, 1> pm = p * m;
  const double denom = a * s + b * m.dot(pm);
  RankOneFusion<N> out;
  out.gain = (b / denom) * pm;
  out.cov = conditioned((p - out.gain * pm.transpose()) / a, p.norm() / a,
                        "fused covariance not positive definite");
  return out;
}

struct Weights {
  double alpha = 1.0;
  double prior = 1.0;
  double meas = 1.0;
};

template <int N>
Weights fusion_weights(const Eigen::Matrix<double, N, N>& p, const Eigen::Matrix<double, N, 1>& m,
                       double s, FusionPolicy policy) {
  if (!policy.use_ci_weights) return {};
  const Eigen::MatrixXd info = (m * m.transpose()) / s;
  const double alpha = optimize_alpha(Eigen::MatrixXd(p), info);
  return {alpha, alpha, 1.0 - alpha};
}

}  // namespace

// ---------------------------------------------------------------------------

RobotPose unicycle_step(const RobotPose& pose, const Twist& twist, double tau) {
  require_finite_pose(pose);
  if (!std::isfinite(twist.v) || !std::isfinite(twist.w) || !std::isfinite(tau))
    throw FusionError("non-finite input");
  if (!(tau > 0.0)) throw FusionError("time step must be positive");
  return {pose.x + tau * std::cos(pose.theta) * twist.v,
          pose.y + tau * std::sin(pose.theta) * twist.v, wrap_angle(pose.theta + tau * twist.w)};
}

Matrix3d unicycle_state_jacobian(const RobotPose& pose, const Twist& twist, double tau) {
  Matrix3d a = Matrix3d::Identity();
  a(0, 2) = -tau * std::sin(pose.theta) * twist.v;
  a(1, 2) = tau * std::cos(pose.theta) * twist.v;
  return a;
}

Matrix32d unicycle_input_jacobian(const RobotPose& pose, double tau) {
  Matrix32d b = Matrix32d::Zero();
  b(0, 0) = tau * std::cos(pose.theta);
  b(1, 0) = tau * std::sin(pose.theta);
  b(2, 1) = tau;
  return b;
}

RobotEstimate ekf_predict(const RobotEstimate& est, const Twist& measured, const TwistNoise& noise,
                          double tau) {
  if (!(noise.sigma_v > 0.0) || !(noise.sigma_w > 0.0))
    throw FusionError("twist noise standard deviations must be positive");
  require_pd(est.cov, "robot covariance not positive definite");
  const Matrix3d a = unicycle_state_jacobian(est.pose, measured, tau);
  const Matrix32d b = unicycle_input_jacobian(est.pose, tau);
  const Eigen::Vector2d q(noise.sigma_v * noise.sigma_v, noise.sigma_w * noise.sigma_w);
  RobotEstimate out;
  out.pose = unicycle_step(est.pose, measured, tau);
  out.cov = conditioned(a * est.cov * a.transpose() + b * q.asDiagonal() * b.transpose(), 0.0,
                        "robot covariance not positive definite");
  return out;
}

RobotEstimate gps_compass_update(const RobotEstimate& est, const PoseMeasurement& meas) {
  require_pd(est.cov, "robot covariance not positive definite");
  require_pd(meas.cov, "pose measurement covariance not positive definite");
  if (!meas.value.allFinite()) throw FusionError("non-finite input");
  const Matrix3d s = sym(est.cov + meas.cov);
  const Eigen::LLT<Matrix3d> llt(s);
  if (llt.info() != Eigen::Success) throw FusionError("innovation covariance not positive definite");
  // K = P S^-1 and I - K = Sigma S^-1 (both S and P symmetric).
  const Matrix3d k = llt.solve(est.cov).transpose();
  const Matrix3d keep = llt.solve(meas.cov).transpose();
  Vector3d innovation = meas.value - est.pose.vector();
  innovation(2) = wrap_angle(innovation(2));
  RobotEstimate out;
  out.pose = RobotPose::from_vector(est.pose.vector() + k * innovation);
  out.cov = conditioned(keep * est.cov * keep.transpose() + k * meas.cov * k.transpose(),
                        est.cov.norm(),
                        "robot covariance not positive definite");
  return out;
}

// ---------------------------------------------------------------------------

double true_bearing(const RobotPose& pose, const Vector2d& landmark) {
  require_finite_pose(pose);
  const Vector2d d = landmark - pose.position();
  if (!(d.norm() > 1e-9)) throw FusionError("robot and landmark positions coincide");
  const Vector2d body = rotation(pose.theta).transpose() * d;
  return std::atan2(body.y(), body.x());
}

BearingGeometry bearing_geometry(double z_angle, const RobotEstimate& robot,
                                 const LandmarkEstimate& lm) {
  require_finite_pose(robot.pose);
  if (!std::isfinite(z_angle) || !lm.position.allFinite()) throw FusionError("non-finite input");
  BearingGeometry g;
  g.z = {std::cos(z_angle), std::sin(z_angle)};
  g.z_perp = {-std::sin(z_angle), std::cos(z_angle)};
  g.z_tilde = rotation(robot.pose.theta) * g.z_perp;
  g.u_r = robot_projection(robot.pose.position(), lm.position);
  const Vector3d ut = g.u_r.transpose() * g.z_tilde;
  g.gamma_r = std::sqrt(std::max(0.0, ut.dot(robot.cov * ut)));
  g.gamma_l = std::sqrt(std::max(0.0, g.z_tilde.dot(lm.cov * g.z_tilde)));
  return g;
}

Eigen::VectorXd BearingErrorModel::error(const Eigen::VectorXd& robot,
                                         const Eigen::VectorXd& landmark,
                                         const Eigen::VectorXd& z) const {
  const Vector2d zz = z.head<2>();
  const Matrix2d proj = Matrix2d::Identity() - zz * zz.transpose();
  return proj * rotation(robot(2)).transpose() * (landmark.head<2>() - robot.head<2>());
}

Eigen::MatrixXd BearingErrorModel::jacobian_x1(const Eigen::VectorXd& robot,
                                               const Eigen::VectorXd& landmark,
                                               const Eigen::VectorXd& z) const {
  const Vector2d zz = z.head<2>();
  const Matrix2d proj = Matrix2d::Identity() - zz * zz.transpose();
  return proj * rotation(robot(2)).transpose() *
         robot_projection(robot.head<2>(), landmark.head<2>());
}

Eigen::MatrixXd BearingErrorModel::jacobian_x2(const Eigen::VectorXd& robot,
                                               const Eigen::VectorXd&,
                                               const Eigen::VectorXd& z) const {
  const Vector2d zz = z.head<2>();
  const Matrix2d proj = Matrix2d::Identity() - zz * zz.transpose();
  return proj * rotation(robot(2)).transpose();
}

NoisyMeasurement BearingErrorModel::measurement(const BearingMeasurement& b) {
  return {b.direction(), b.sigma * b.sigma * Eigen::Matrix2d::Identity()};
}

// ---------------------------------------------------------------------------

LandmarkUpdate landmark_bearing_update_detailed(const LandmarkEstimate& lm,
                                                const RobotEstimate& robot,
                                                const BearingMeasurement& meas,
                                                MethodVariant variant) {
  const FusionPolicy policy = policy_for(variant);
  require_valid_bearing(meas);
  require_pd(lm.cov, "landmark covariance not positive definite");
  require_pd(robot.cov, "robot covariance not positive definite");
  const Vector2d d = lm.position - robot.pose.position();
  if (!d.allFinite()) throw FusionError("non-finite input");
  if (d.norm() < kMinBearingRange) return {lm, 1.0, true};

  const BearingGeometry g = bearing_geometry(meas.angle, robot, lm);
  const double gamma = policy.use_noise_inflation ? g.gamma_r : 0.0;
  const double s = meas.sigma * meas.sigma + gamma * gamma;
  const Vector2d& m = g.z_tilde;
  const Weights w = fusion_weights<2>(lm.cov, m, s, policy);
  const auto fused = rank_one_fusion<2>(lm.cov, m, s, w.prior, w.meas);
  LandmarkUpdate out;
  out.estimate.position = lm.position - fused.gain * m.dot(d);
  out.estimate.cov = fused.cov;
  out.alpha = w.alpha;
  return out;
}

LandmarkEstimate landmark_bearing_update(const LandmarkEstimate& lm, const RobotEstimate& robot,
                                         const BearingMeasurement& meas, MethodVariant variant) {
  return landmark_bearing_update_detailed(lm, robot, meas, variant).estimate;
}

RobotUpdate robot_bearing_update_detailed(const RobotEstimate& robot, const LandmarkEstimate& lm,
                                          const BearingMeasurement& meas, MethodVariant variant) {
  const FusionPolicy policy = policy_for(variant);
  require_valid_bearing(meas);
  require_pd(lm.cov, "landmark covariance not positive definite");
  require_pd(robot.cov, "robot covariance not positive definite");
  const Vector2d d = lm.position - robot.pose.position();
  if (!d.allFinite()) throw FusionError("non-finite input");
  if (d.norm() < kMinBearingRange) return {robot, 1.0, true};

  const BearingGeometry g = bearing_geometry(meas.angle, robot, lm);
  const double gamma = policy.use_noise_inflation ? g.gamma_l : 0.0;
  const double s = meas.sigma * meas.sigma + gamma * gamma;
  const Vector3d m = g.u_r.transpose() * g.z_tilde;
  const Weights w = fusion_weights<3>(robot.cov, m, s, policy);
  const auto fused = rank_one_fusion<3>(robot.cov, m, s, w.prior, w.meas);
  RobotUpdate out;
  out.estimate.pose =
      RobotPose::from_vector(robot.pose.vector() - fused.gain * g.z_tilde.dot(d));
  out.estimate.cov = fused.cov;
  out.alpha = w.alpha;
  return out;
}

RobotEstimate robot_bearing_update(const RobotEstimate& robot, const LandmarkEstimate& lm,
                                   const BearingMeasurement& meas, MethodVariant variant) {
  return robot_bearing_update_detailed(robot, lm, meas, variant).estimate;
}

// ---------------------------------------------------------------------------

JointEstimate joint_predict(const JointEstimate& est, const Twist& measured,
                            const TwistNoise& noise, double tau) {
  if (!(noise.sigma_v > 0.0) || !(noise.sigma_w > 0.0))
    throw FusionError("twist noise standard deviations must be positive");
  require_pd(est.cov, "joint covariance not positive definite");
  const RobotPose pose = est.pose();
  Matrix5d a = Matrix5d::Identity();
  a.topLeftCorner<3, 3>() = unicycle_state_jacobian(pose, measured, tau);
  Eigen::Matrix<double, 5, 2> b = Eigen::Matrix<double, 5, 2>::Zero();
  b.topRows<3>() = unicycle_input_jacobian(pose, tau);
  const Eigen::Vector2d q(noise.sigma_v * noise.sigma_v, noise.sigma_w * noise.sigma_w);

  JointEstimate out;
  const RobotPose next = unicycle_step(pose, measured, tau);
  out.state = est.state;
  out.state.head<3>() = next.vector();
  out.cov = conditioned(a * est.cov * a.transpose() + b * q.asDiagonal() * b.transpose(), 0.0,
                        "joint covariance not positive definite");
  return out;
}

JointEstimate joint_gps_update(const JointEstimate& est, const PoseMeasurement& meas) {
  require_pd(est.cov, "joint covariance not positive definite");
  require_pd(meas.cov, "pose measurement covariance not positive definite");
  if (!meas.value.allFinite()) throw FusionError("non-finite input");
  const Matrix3d s = sym(Matrix3d(est.cov.topLeftCorner<3, 3>()) + meas.cov);
  const Eigen::LLT<Matrix3d> llt(s);
  if (llt.info() != Eigen::Success) throw FusionError("innovation covariance not positive definite");
  // K = P C^T S^-1, C = [I3 0].
  const Eigen::Matrix<double, 5, 3> pct = est.cov.leftCols<3>();
  const Eigen::Matrix<double, 5, 3> k = llt.solve(pct.transpose()).transpose();
  Vector3d innovation = meas.value - est.state.head<3>();
  innovation(2) = wrap_angle(innovation(2));

  Matrix5d keep = Matrix5d::Identity();
  keep.leftCols<3>() -= k;
  JointEstimate out;
  out.state = est.state + k * innovation;
  out.state(2) = wrap_angle(out.state(2));
  out.cov = conditioned(keep * est.cov * keep.transpose() + k * meas.cov * k.transpose(),
                        est.cov.norm(),
                        "joint covariance not positive definite");
  return out;
}

Matrix25d joint_bearing_projection(const JointEstimate& est) {
  Matrix25d u = Matrix25d::Zero();
  u.leftCols<3>() = robot_projection(est.state.head<2>(), est.landmark());
  u.rightCols<2>() = Matrix2d::Identity();
  return u;
}

JointEstimate joint_bearing_update(const JointEstimate& est, const BearingMeasurement& meas) {
  require_valid_bearing(meas);
  require_pd(est.cov, "joint covariance not positive definite");
  if (!est.state.allFinite()) throw FusionError("non-finite input");
  const Vector2d d = est.landmark() - est.state.head<2>();
  if (d.norm() < kMinBearingRange) return est;

  const Vector2d z_perp(-std::sin(meas.angle), std::cos(meas.angle));
  const Vector2d z_tilde = rotation(est.state(2)) * z_perp;
  const Vector5d m = joint_bearing_projection(est).transpose() * z_tilde;
  const auto fused = rank_one_fusion<5>(est.cov, m, meas.sigma * meas.sigma, 1.0, 1.0);
  JointEstimate out;
  out.state = est.state - fused.gain * z_tilde.dot(d);
  out.state(2) = wrap_angle(out.state(2));
  out.cov = fused.cov;
  return out;
}

}  // namespace modfuse
