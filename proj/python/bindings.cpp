#include <string>
#include <tuple>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "modfuse/core.hpp"
#include "modfuse/report.hpp"
#include "modfuse/robot_landmark.hpp"
#include "modfuse/scenario.hpp"

namespace py = pybind11;
using namespace modfuse;

namespace {

MethodVariant method_from(const std::string& name) {
  const auto m = parse_method(name);
  if (!m) throw py::value_error("unknown method '" + name + "'");
  return *m;
}

Slot slot_from(int s) {
  if (s != 1 && s != 2) throw py::value_error("slot must be 1 or 2");
  return static_cast<Slot>(s);
}

RobotEstimate robot_from(const Eigen::Vector3d& pose, const Eigen::Matrix3d& cov) {
  return {RobotPose::from_vector(pose), cov};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Modular least-squares fusion for coupled subsystems";

  py::register_exception<FusionError>(m, "FusionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.attr("ALPHA_MIN") = kAlphaMin;

  m.def("wrap_angle", &wrap_angle, py::arg("angle"));

  m.def("method_names", [] {
    std::vector<std::string> names;
    for (MethodVariant v : kAllMethods) names.emplace_back(method_name(v));
    return names;
  });

  m.def("optimize_alpha", &optimize_alpha, py::arg("prior_cov"), py::arg("info_other"),
        "CI weight minimizing -log det(alpha P^-1 + (1 - alpha) info_other).");

  m.def(
      "ci_fuse",
      [](const Eigen::VectorXd& xa, const Eigen::MatrixXd& pa, const Eigen::VectorXd& xb,
         const Eigen::MatrixXd& pb) {
        const auto r = ci_fuse_detailed({xa, pa}, {xb, pb});
        return std::make_tuple(r.estimate.mean(), r.estimate.cov(), r.alpha);
      },
      py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"),
      "Covariance intersection of two estimates; returns (mean, cov, alpha).");

  m.def(
      "inflate_noise",
      [](const Eigen::MatrixXd& a1, const Eigen::MatrixXd& a2, const Eigen::VectorXd& own_lin,
         const Eigen::VectorXd& other_mean, const Eigen::MatrixXd& other_cov, const Eigen::VectorXd& z,
         const Eigen::MatrixXd& noise_cov, int other_slot) {
        const AffineRelativeModel model(a1, a2);
        return inflate_noise(model, own_lin, {other_mean, other_cov}, {z, noise_cov}, slot_from(other_slot));
      },
      py::arg("a1"), py::arg("a2"), py::arg("own_lin"), py::arg("other_mean"), py::arg("other_cov"),
      py::arg("z"), py::arg("noise_cov"), py::arg("other_slot") = 2,
      "W + H_other P_other H_other^T for the affine map h = z - A1 x1 - A2 x2.");

  m.def(
      "modular_fusion_update",
      [](const Eigen::VectorXd& own_mean, const Eigen::MatrixXd& own_cov, const Eigen::VectorXd& partner_mean,
         const Eigen::MatrixXd& partner_cov, const Eigen::VectorXd& z, const Eigen::MatrixXd& noise_cov,
         const Eigen::MatrixXd& a1, const Eigen::MatrixXd& a2, int own_slot, bool ci_weights,
         bool noise_inflation) {
        const AffineRelativeModel model(a1, a2);
        const auto r = modular_fusion_update_detailed({own_mean, own_cov}, {partner_mean, partner_cov},
                                                      {z, noise_cov}, model, slot_from(own_slot),
                                                      {ci_weights, noise_inflation});
        return std::make_tuple(r.estimate.mean(), r.estimate.cov(), r.alpha);
      },
      py::arg("own_mean"), py::arg("own_cov"), py::arg("partner_mean"), py::arg("partner_cov"), py::arg("z"),
      py::arg("noise_cov"), py::arg("a1"), py::arg("a2"), py::arg("own_slot") = 1,
      py::arg("ci_weights") = true, py::arg("noise_inflation") = true,
      "Updates one subsystem from z = A1 x1 + A2 x2 + noise; returns (mean, cov, alpha).");

  m.def("true_bearing",
        [](const Eigen::Vector3d& pose, const Eigen::Vector2d& landmark) {
          return true_bearing(RobotPose::from_vector(pose), landmark);
        },
        py::arg("pose"), py::arg("landmark"));

  m.def(
      "landmark_bearing_update",
      [](const Eigen::Vector2d& lm, const Eigen::Matrix2d& lm_cov, const Eigen::Vector3d& pose,
         const Eigen::Matrix3d& pose_cov, double angle, double sigma, const std::string& method) {
        const auto r = landmark_bearing_update_detailed({lm, lm_cov}, robot_from(pose, pose_cov), {angle, sigma},
                                                        method_from(method));
        return std::make_tuple(r.estimate.position, r.estimate.cov, r.alpha, r.skipped);
      },
      py::arg("landmark"), py::arg("landmark_cov"), py::arg("pose"), py::arg("pose_cov"), py::arg("angle"),
      py::arg("sigma"), py::arg("method") = "fsafe",
      "Landmark side of a bearing update; returns (position, cov, alpha, skipped).");

  m.def(
      "robot_bearing_update",
      [](const Eigen::Vector3d& pose, const Eigen::Matrix3d& pose_cov, const Eigen::Vector2d& lm,
         const Eigen::Matrix2d& lm_cov, double angle, double sigma, const std::string& method) {
        const auto r = robot_bearing_update_detailed(robot_from(pose, pose_cov), {lm, lm_cov}, {angle, sigma},
                                                     method_from(method));
        return std::make_tuple(Eigen::Vector3d(r.estimate.pose.vector()), r.estimate.cov, r.alpha, r.skipped);
      },
      py::arg("pose"), py::arg("pose_cov"), py::arg("landmark"), py::arg("landmark_cov"), py::arg("angle"),
      py::arg("sigma"), py::arg("method") = "fsafe",
      "Robot side of a bearing update; returns (pose, cov, alpha, skipped).");

  m.def(
      "_run_study",
      [](const std::string& config_json, int threads) {
        const ScenarioConfig cfg = config_from_json(nlohmann::json::parse(config_json));
        StudyResult r;
        {
          py::gil_scoped_release release;
          r = run_study(cfg, {threads, std::nullopt});
        }
        std::vector<std::tuple<int, std::uint64_t, std::string, double, double, double, bool>> rows;
        for (const auto& row : result_rows(r.trials)) {
          rows.emplace_back(row.trial_index, row.seed, std::string(method_name(row.method)), row.landmark_error,
                            row.robot_position_error, row.landmark_cov_det, row.failed);
        }
        return std::make_tuple(summary_to_json(r.summary).dump(), rows);
      },
      py::arg("config_json"), py::arg("threads"));

  m.def("_default_config", [] { return config_to_json(ScenarioConfig{}).dump(); });
}
