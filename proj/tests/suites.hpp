#pragma once

// Randomized property checks shared by the unit tests (small counts) and the
// acceptance binary (full counts). Each returns the worst discrepancy seen.

#include <algorithm>
#include <cstdint>

#include "modfuse/core.hpp"
#include "modfuse/robot_landmark.hpp"
#include "oracles.hpp"

namespace suites {

using namespace oracle;

struct CiWorst {
  double info = 0.0;        // inverse(P+) vs a Pa^-1 + (1-a) Pb^-1
  double mean_forms = 0.0;  // information-weighted mean vs gain form
  double normal_eq = 0.0;   // mean vs normal equations of the weighted cost
  double det_excess = -1e300;  // det(P+) - min(det Pa, det Pb)
  double alpha_gap = 0.0;      // f(alpha*) - f(grid best), should be <= 0
};

inline CiWorst ci_suite(int cases, std::uint64_t seed) {
  Rng rng(seed);
  CiWorst w;
  for (int k = 0; k < cases; ++k) {
    const auto n = static_cast<Eigen::Index>(1 + k % 5);
    const MatrixXd pa = random_spd(rng, n), pb = random_spd(rng, n);
    const VectorXd xa = random_vector(rng, n, 10.0), xb = random_vector(rng, n, 10.0);
    const auto res = modfuse::ci_fuse_detailed({xa, pa}, {xb, pb});
    const double a = res.alpha;
    const MatrixXd& p = res.estimate.cov();
    const VectorXd& x = res.estimate.mean();

    const MatrixXd ia = dense_inverse(pa), ib = dense_inverse(pb);
    w.info = std::max(w.info, rel_diff(dense_inverse(p), a * ia + (1 - a) * ib));

    const VectorXd form1 = p * (a * ia * xa + (1 - a) * ib * xb);
    const VectorXd form2 = xa - (1 - a) * p * ib * (xa - xb);
    w.mean_forms = std::max({w.mean_forms, rel_diff(form1, form2), rel_diff(x, form2)});

    const MatrixXd normal = a * ia + (1 - a) * ib;
    const VectorXd rhs = a * ia * xa + (1 - a) * ib * xb;
    w.normal_eq = std::max(w.normal_eq, rel_diff(x, normal.fullPivLu().solve(rhs)));

    w.det_excess = std::max(w.det_excess, p.determinant() - std::min(pa.determinant(), pb.determinant()));

    if (k < 200) {
      const double g = grid_alpha(pa, ib, 2001, 0.0);
      w.alpha_gap = std::max(w.alpha_gap, neg_log_det_info(pa, ib, a) - neg_log_det_info(pa, ib, g));
    }
  }
  return w;
}

/// Linear relative maps h = z - A1 x1 - A2 x2: the marginal cost of x1 from
/// the inflated noise against minimizing over x2 by the normal equations.
inline double marginal_cost_suite(int cases, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < cases; ++k) {
    const auto n1 = static_cast<Eigen::Index>(1 + k % 4);
    const auto n2 = static_cast<Eigen::Index>(1 + (k / 4) % 4);
    const auto p = static_cast<Eigen::Index>(1 + (k / 16) % 4);
    const MatrixXd a1 = random_matrix(rng, p, n1), a2 = random_matrix(rng, p, n2);
    const modfuse::AffineRelativeModel model(a1, a2);
    const MatrixXd p2 = random_spd(rng, n2), w = random_spd(rng, p);
    const VectorXd x2_hat = random_vector(rng, n2, 5.0), z = random_vector(rng, p, 5.0);
    const VectorXd x1 = random_vector(rng, n1, 5.0);

    const MatrixXd w_tilde = modfuse::inflate_noise(model, x1, {x2_hat, p2}, {z, w}, modfuse::Slot::Second);
    const VectorXd h = z - a1 * x1 - a2 * x2_hat;
    const double j_inflated = 0.5 * h.dot(w_tilde.fullPivLu().solve(h));

    const MatrixXd ip2 = dense_inverse(p2), iw = dense_inverse(w);
    const MatrixXd normal = ip2 + a2.transpose() * iw * a2;
    const VectorXd rhs = ip2 * x2_hat + a2.transpose() * iw * (z - a1 * x1);
    const VectorXd x2 = normal.fullPivLu().solve(rhs);
    const VectorXd r = z - a1 * x1 - a2 * x2;
    const double j_dense = 0.5 * (x2 - x2_hat).dot(ip2 * (x2 - x2_hat)) + 0.5 * r.dot(iw * r);

    worst = std::max(worst, std::abs(j_inflated - j_dense) / std::max(std::abs(j_dense), 1e-300));
  }
  return worst;
}

inline VectorXd wrapped_robot(VectorXd v) {
  v(2) = modfuse::wrap_angle(v(2));
  return v;
}

inline double robot_mean_diff(const VectorXd& lib, const VectorXd& ref) {
  VectorXd d = lib - ref;
  d(2) = modfuse::wrap_angle(d(2));
  return d.norm() / std::max(lib.norm(), ref.norm());
}

struct ShermanMorrisonWorst {
  double landmark = 0.0;
  double robot = 0.0;
  double joint = 0.0;
};

inline ShermanMorrisonWorst sherman_morrison_suite(int cases, std::uint64_t seed) {
  using modfuse::MethodVariant;
  Rng rng(seed);
  ShermanMorrisonWorst w;
  const MethodVariant modular[] = {MethodVariant::FSafe, MethodVariant::FKalman, MethodVariant::Safe,
                                   MethodVariant::Kalman};
  for (int k = 0; k < cases; ++k) {
    const BearingCase c = random_bearing_case(rng);
    for (MethodVariant v : modular) {
      const auto pol = modfuse::policy_for(v);
      const auto lu = modfuse::landmark_bearing_update_detailed(c.lm, c.robot, c.meas, v);
      const double la = pol.use_ci_weights ? lu.alpha : 1.0, lb = pol.use_ci_weights ? 1.0 - lu.alpha : 1.0;
      const Dense dl = dense_bearing_fusion(c.robot, c.lm, c.meas, false, pol.use_noise_inflation, la, lb);
      w.landmark = std::max({w.landmark, rel_diff(lu.estimate.position, dl.mean), rel_diff(lu.estimate.cov, dl.cov)});

      const auto ru = modfuse::robot_bearing_update_detailed(c.robot, c.lm, c.meas, v);
      const double ra = pol.use_ci_weights ? ru.alpha : 1.0, rb = pol.use_ci_weights ? 1.0 - ru.alpha : 1.0;
      const Dense dr = dense_bearing_fusion(c.robot, c.lm, c.meas, true, pol.use_noise_inflation, ra, rb);
      w.robot = std::max({w.robot, robot_mean_diff(ru.estimate.pose.vector(), dr.mean),
                          rel_diff(ru.estimate.cov, dr.cov)});
    }

    modfuse::JointEstimate j;
    j.state = stack(c.robot, c.lm);
    j.cov = random_spd(rng, 5, 0.01, 200.0);
    const auto ju = modfuse::joint_bearing_update(j, c.meas);
    const Dense dj = dense_joint_fusion(j, c.meas);
    VectorXd diff = ju.state - dj.mean;
    diff(2) = modfuse::wrap_angle(diff(2));
    w.joint = std::max({w.joint, diff.norm() / std::max(ju.state.norm(), dj.mean.norm()),
                        rel_diff(ju.cov, dj.cov)});
  }
  return w;
}

struct JacobianWorst {
  double a = 0.0, b = 0.0, h_r = 0.0, h_l = 0.0, joint = 0.0;
};

inline double jac_err(const MatrixXd& analytic, const MatrixXd& numeric) {
  return (analytic - numeric).norm() / std::max(1.0, numeric.norm());
}

inline JacobianWorst jacobian_suite(int cases, std::uint64_t seed) {
  Rng rng(seed);
  JacobianWorst w;
  for (int k = 0; k < cases; ++k) {
    const BearingCase c = random_bearing_case(rng);
    const modfuse::Twist tw{uniform(rng, -2, 2), uniform(rng, -1, 1)};
    const double tau = uniform(rng, 0.1, 2.0);

    auto step_state = [&](const VectorXd& x) -> VectorXd {
      // Unwrapped heading so the difference quotient never straddles the seam.
      const auto p = modfuse::unicycle_step({x(0), x(1), x(2)}, tw, tau);
      return Eigen::Vector3d(p.x, p.y, x(2) + tau * tw.w);
    };
    const VectorXd x0 = c.robot.pose.vector();
    w.a = std::max(w.a, jac_err(modfuse::unicycle_state_jacobian(c.robot.pose, tw, tau),
                                central_difference(step_state, x0)));

    auto step_input = [&](const VectorXd& u) -> VectorXd {
      const auto p = modfuse::unicycle_step(c.robot.pose, {u(0), u(1)}, tau);
      return Eigen::Vector3d(p.x, p.y, c.robot.pose.theta + tau * u(1));
    };
    w.b = std::max(w.b, jac_err(modfuse::unicycle_input_jacobian(c.robot.pose, tau),
                                central_difference(step_input, Eigen::Vector2d(tw.v, tw.w))));

    // Modular Jacobians from the geometry: H_r = R^T z~ z~^T U_r, H_l = R^T z~ z~^T.
    const auto g = modfuse::bearing_geometry(c.meas.angle, c.robot, c.lm);
    const Eigen::Matrix2d rt = rot(c.robot.pose.theta).transpose();
    const MatrixXd h_r = rt * g.z_tilde * g.z_tilde.transpose() * g.u_r;
    const MatrixXd h_l = rt * g.z_tilde * g.z_tilde.transpose();
    const VectorXd x = stack(c.robot, c.lm);
    auto err_of_robot = [&](const VectorXd& xr) -> VectorXd {
      VectorXd full = x;
      full.head<3>() = xr;
      return bearing_error(full, c.meas.angle);
    };
    auto err_of_lm = [&](const VectorXd& pl) -> VectorXd {
      VectorXd full = x;
      full.tail<2>() = pl;
      return bearing_error(full, c.meas.angle);
    };
    const MatrixXd fd_r = central_difference(err_of_robot, x.head<3>());
    const MatrixXd fd_l = central_difference(err_of_lm, x.tail<2>());
    const modfuse::BearingErrorModel model;
    const VectorXd z = c.meas.direction();
    w.h_r = std::max({w.h_r, jac_err(h_r, fd_r),
                      jac_err(model.jacobian_x1(x.head<3>(), x.tail<2>(), z), fd_r)});
    w.h_l = std::max({w.h_l, jac_err(h_l, fd_l),
                      jac_err(model.jacobian_x2(x.head<3>(), x.tail<2>(), z), fd_l)});

    modfuse::JointEstimate j{x, Eigen::Matrix<double, 5, 5>::Identity()};
    const MatrixXd h_joint = rt * g.z_tilde * g.z_tilde.transpose() * modfuse::joint_bearing_projection(j);
    auto err_joint = [&](const VectorXd& xx) -> VectorXd { return bearing_error(xx, c.meas.angle); };
    w.joint = std::max(w.joint, jac_err(h_joint, central_difference(err_joint, x)));
  }
  return w;
}

}  // namespace suites
