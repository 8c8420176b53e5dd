#pragma once

// Randomized robot/landmark scenario, one-trial simulation of all methods on
// shared measurement realizations, and the Monte Carlo study runner.

#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modfuse/robot_landmark.hpp"
#include "modfuse/stats.hpp"

namespace modfuse {

using Rng = std::mt19937_64;

struct NoiseHyperparams {
  // Second arguments of the zero-mean normal samplers; all are variances.
  double sigma_v_variance = 0.25;
  double sigma_w_variance = (std::numbers::pi / 90.0) * (std::numbers::pi / 90.0);
  Eigen::Vector3d gps_variance{25.0, 25.0,
                               (7.0 * std::numbers::pi / 180.0) * (7.0 * std::numbers::pi / 180.0)};
  double bearing_variance = (7.0 * std::numbers::pi / 180.0) * (7.0 * std::numbers::pi / 180.0);
  // false: Sigma_r = diag(gps_variance) for every trial instead of sampling stds.
  bool sample_gps_stds = true;
};

struct ScenarioConfig {
  double robot_half_width = 13.0;     // initial robot placement
  double landmark_half_width = 7.5;   // landmark placement
  double estimate_half_width = 15.0;  // initial position estimates
  double arena_half_width = 15.0;     // area the robot must stay in
  double lookahead_half_width = 13.0; // box checked by the yaw override

  int steps = 100;
  double tau = 1.0;
  int gps_period = 3;
  int bearing_period = 6;
  int schedule_phase = 0;  // measurement at t in 1..steps when t % period == phase

  Eigen::Vector3d initial_cov_robot{100.0, 400.0,
                                    (std::numbers::pi / 18.0) * (std::numbers::pi / 18.0)};
  double initial_cov_landmark_scale = 9000.0;
  NoiseHyperparams noise;

  double speed = 1.0;
  double w0 = -0.07;
  double yaw_keep = 0.4;
  double yaw_mix = 0.6;
  double yaw_innovation_min = -std::numbers::pi / 4.0;
  double yaw_innovation_max = std::numbers::pi / 4.0;
  double yaw_clamp = std::numbers::pi / 4.0;  // |w| limit of the containment override
  int lookahead_steps = 1;

  // Testing hooks: force every noise std to this value / start from the truth.
  std::optional<double> noise_std_override;
  bool exact_initial_estimates = false;

  std::vector<MethodVariant> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::uint64_t seed = 0;
  int n_trials = 2000;

  /// Throws ConfigError.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-trial generator derived from (study seed, trial index) only.
std::uint64_t trial_seed(std::uint64_t study_seed, std::uint64_t trial_index);

struct SampledTrial {
  RobotPose truth_pose;
  Eigen::Vector2d landmark;
  RobotPose estimate_pose;
  Eigen::Vector2d estimate_landmark;
  Eigen::Matrix3d robot_cov;
  Eigen::Matrix2d landmark_cov;
  TwistNoise twist_noise;
  Eigen::Vector3d gps_std;
  double bearing_std = 0.0;

  bool operator==(const SampledTrial&) const = default;
};

SampledTrial sample_scenario(const ScenarioConfig& config, Rng& rng);

/// Applies the containment override to a candidate yaw rate: if holding
/// `candidate` for `lookahead_steps` Euler steps leaves the lookahead box,
/// steer towards the origin instead.
double containment_yaw(double candidate, const RobotPose& pose, const ScenarioConfig& config);

/// keep * w_prev + mix * delta, passed through containment_yaw.
double yaw_command(double w_prev, const RobotPose& pose, double delta,
                   const ScenarioConfig& config);

/// yaw_command with delta ~ U(yaw_innovation_min, yaw_innovation_max).
double yaw_controller(double w_prev, const RobotPose& pose, Rng& rng,
                      const ScenarioConfig& config);

/// Ground truth and every measurement of one trial. All methods consume it.
struct TrialData {
  SampledTrial sample;
  std::vector<RobotPose> truth;             // steps + 1
  std::vector<Twist> true_twist;            // steps
  std::vector<Twist> measured_twist;        // steps
  std::vector<std::optional<PoseMeasurement>> gps;         // indexed by t, steps + 1
  std::vector<std::optional<BearingMeasurement>> bearing;  // indexed by t, steps + 1
};

TrialData generate_trial_data(const ScenarioConfig& config, Rng& rng);

struct TraceRow {
  int step = 0;
  RobotPose estimate_pose;
  Eigen::Vector2d estimate_landmark;
};

struct MethodOutcome {
  MethodVariant method = MethodVariant::FSafe;
  bool failed = false;
  std::string failure;
  double landmark_error = 0.0;        // e_l(T)
  double robot_position_error = 0.0;  // ||p_r(T) - p_hat_r(T)||
  double landmark_cov_det = 0.0;      // det P_l(T)
  double landmark_nees = 0.0;         // e^T P_l^-1 e / 2
  std::vector<double> landmark_error_history;  // e_l(k), k = 0..steps
  int gps_updates = 0;
  int bearing_updates = 0;
  std::vector<TraceRow> trace;  // filled only when tracing
};

struct TrialRecord {
  int trial_index = 0;
  std::uint64_t seed = 0;
  std::vector<MethodOutcome> outcomes;  // config.methods order
  std::vector<RobotPose> truth;         // filled only when tracing
  Eigen::Vector2d landmark = Eigen::Vector2d::Zero();
};

/// Runs every configured method on the same trial data.
TrialRecord run_methods(const ScenarioConfig& config, const TrialData& data, int trial_index,
                        std::uint64_t seed, bool trace);

TrialRecord simulate_trial(const ScenarioConfig& config, int trial_index, bool trace = false);

struct MethodSummary {
  MethodVariant method = MethodVariant::FSafe;
  DistributionSummary errors;
};

struct StudySummary {
  std::vector<MethodSummary> methods;

  const MethodSummary* find(MethodVariant m) const;
};

StudySummary summarize_trials(const std::vector<TrialRecord>& trials,
                              const std::vector<MethodVariant>& methods);

struct RunOptions {
  int threads = 1;
  std::optional<int> trace_trial;
};

struct StudyResult {
  std::vector<TrialRecord> trials;  // by trial index
  StudySummary summary;
};

StudyResult run_study(const ScenarioConfig& config, const RunOptions& options = {});

}  // namespace modfuse
