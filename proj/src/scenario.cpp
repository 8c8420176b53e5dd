#include "modfuse/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include <Eigen/Dense>

namespace modfuse {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(Rng& rng, double stddev) {
  return std::normal_distribution<double>(0.0, 1.0)(rng) * stddev;
}

bool scheduled(int t, int period, int phase) { return t % period == phase % period; }

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void ScenarioConfig::validate() const {
  require(steps >= 1, "steps must be >= 1");
  require(std::isfinite(tau) && tau > 0.0, "tau must be positive");
  require(gps_period >= 1, "gps_period must be >= 1");
  require(bearing_period >= 1, "bearing_period must be >= 1");
  require(schedule_phase >= 0, "schedule_phase must be >= 0");
  require(robot_half_width > 0.0 && landmark_half_width > 0.0 && estimate_half_width > 0.0 &&
              arena_half_width > 0.0 && lookahead_half_width > 0.0,
          "placement half widths must be positive");
  require((initial_cov_robot.array() > 0.0).all(), "initial_cov_robot entries must be positive");
  require(initial_cov_landmark_scale > 0.0, "initial_cov_landmark_scale must be positive");
  require(noise.sigma_v_variance >= 0.0 && noise.sigma_w_variance >= 0.0 &&
              noise.bearing_variance >= 0.0 && (noise.gps_variance.array() >= 0.0).all(),
          "noise variances must be non-negative");
  require(!noise_std_override || *noise_std_override > 0.0, "noise_std_override must be positive");
  require(yaw_innovation_min <= yaw_innovation_max, "yaw_innovation_range must be ordered");
  require(yaw_clamp > 0.0, "yaw_clamp must be positive");
  require(lookahead_steps >= 1, "lookahead_steps must be >= 1");
  require(!methods.empty(), "at least one method is required");
  require(n_trials >= 1, "n_trials must be >= 1");
}

std::uint64_t trial_seed(std::uint64_t study_seed, std::uint64_t trial_index) {
  return splitmix64(splitmix64(study_seed) ^ (trial_index * 0xD1B54A32D192ED03ULL));
}

SampledTrial sample_scenario(const ScenarioConfig& config, Rng& rng) {
  SampledTrial s;
  const double rw = config.robot_half_width;
  const double lw = config.landmark_half_width;
  const double ew = config.estimate_half_width;

  s.truth_pose.x = uniform(rng, -rw, rw);
  s.truth_pose.y = uniform(rng, -rw, rw);
  s.landmark.x() = uniform(rng, -lw, lw);
  s.landmark.y() = uniform(rng, -lw, lw);
  s.truth_pose.theta = wrap_angle(uniform(rng, 0.0, kTwoPi));

  s.estimate_pose.x = uniform(rng, -ew, ew);
  s.estimate_pose.y = uniform(rng, -ew, ew);
  s.estimate_landmark.x() = uniform(rng, -ew, ew);
  s.estimate_landmark.y() = uniform(rng, -ew, ew);
  s.estimate_pose.theta = wrap_angle(uniform(rng, 0.0, kTwoPi));

  s.robot_cov = config.initial_cov_robot.asDiagonal();
  s.landmark_cov = config.initial_cov_landmark_scale * Eigen::Matrix2d::Identity();

  const NoiseHyperparams& h = config.noise;
  s.twist_noise.sigma_v = std::abs(normal(rng, std::sqrt(h.sigma_v_variance)));
  s.twist_noise.sigma_w = std::abs(normal(rng, std::sqrt(h.sigma_w_variance)));
  for (int i = 0; i < 3; ++i) s.gps_std(i) = std::abs(normal(rng, std::sqrt(h.gps_variance(i))));
  if (!h.sample_gps_stds) s.gps_std = h.gps_variance.cwiseSqrt();
  s.bearing_std = std::abs(normal(rng, std::sqrt(h.bearing_variance)));

  if (config.noise_std_override) {
    const double v = *config.noise_std_override;
    s.twist_noise = {v, v};
    s.gps_std.setConstant(v);
    s.bearing_std = v;
  }
  if (config.exact_initial_estimates) {
    s.estimate_pose = s.truth_pose;
    s.estimate_landmark = s.landmark;
  }
  return s;
}

double containment_yaw(double candidate, const RobotPose& pose, const ScenarioConfig& config) {
  const double box = config.lookahead_half_width;
  RobotPose p = pose;
  const Twist twist{config.speed, candidate};
  for (int i = 0; i < config.lookahead_steps; ++i) {
    p = unicycle_step(p, twist, config.tau);
    if (std::abs(p.x) > box || std::abs(p.y) > box) {
      const double heading_error = wrap_angle(std::atan2(-pose.y, -pose.x) - pose.theta);
      return std::clamp(heading_error / config.tau, -config.yaw_clamp, config.yaw_clamp);
    }
  }
  return candidate;
}

double yaw_command(double w_prev, const RobotPose& pose, double delta,
                   const ScenarioConfig& config) {
  return containment_yaw(config.yaw_keep * w_prev + config.yaw_mix * delta, pose, config);
}

double yaw_controller(double w_prev, const RobotPose& pose, Rng& rng,
                      const ScenarioConfig& config) {
  const double delta = uniform(rng, config.yaw_innovation_min, config.yaw_innovation_max);
  return yaw_command(w_prev, pose, delta, config);
}

TrialData generate_trial_data(const ScenarioConfig& config, Rng& rng) {
  TrialData d;
  d.sample = sample_scenario(config, rng);
  const SampledTrial& s = d.sample;
  const int n = config.steps;
  d.truth.reserve(n + 1);
  d.gps.assign(n + 1, std::nullopt);
  d.bearing.assign(n + 1, std::nullopt);

  RobotPose pose = s.truth_pose;
  d.truth.push_back(pose);
  double w = containment_yaw(config.w0, pose, config);
  const Eigen::Matrix3d gps_cov = s.gps_std.cwiseAbs2().asDiagonal();

  for (int k = 0; k < n; ++k) {
    const Twist truth{config.speed, w};
    const Twist measured{truth.v + normal(rng, s.twist_noise.sigma_v),
                         truth.w + normal(rng, s.twist_noise.sigma_w)};
    d.true_twist.push_back(truth);
    d.measured_twist.push_back(measured);
    pose = unicycle_step(pose, truth, config.tau);
    d.truth.push_back(pose);

    const int t = k + 1;
    if (scheduled(t, config.gps_period, config.schedule_phase)) {
      Eigen::Vector3d y = pose.vector();
      for (int i = 0; i < 3; ++i) y(i) += normal(rng, s.gps_std(i));
      y(2) = wrap_angle(y(2));
      d.gps[t] = PoseMeasurement{y, gps_cov};
    }
    if (scheduled(t, config.bearing_period, config.schedule_phase)) {
      const double noise = normal(rng, s.bearing_std);
      if ((s.landmark - pose.position()).norm() > 1e-9) {
        d.bearing[t] =
            BearingMeasurement{wrap_angle(true_bearing(pose, s.landmark) + noise), s.bearing_std};
      }
    }
    w = yaw_controller(w, pose, rng, config);
  }
  return d;
}

// ---------------------------------------------------------------------------

namespace {

struct FilterState {
  RobotPose pose;
  Eigen::Matrix3d robot_cov;
  Eigen::Vector2d landmark;
  Eigen::Matrix2d landmark_cov;
};

class ModularFilter {
 public:
  ModularFilter(const SampledTrial& s, MethodVariant m)
      : method_(m), robot_{s.estimate_pose, s.robot_cov}, lm_{s.estimate_landmark, s.landmark_cov} {}

  void predict(const Twist& u, const TwistNoise& noise, double tau) {
    robot_ = ekf_predict(robot_, u, noise, tau);
  }
  void gps(const PoseMeasurement& y) { robot_ = gps_compass_update(robot_, y); }
  void bearing(const BearingMeasurement& b) {
    // Both sides linearize at the same prior snapshot.
    LandmarkEstimate lm = landmark_bearing_update(lm_, robot_, b, method_);
    RobotEstimate robot = robot_bearing_update(robot_, lm_, b, method_);
    lm_ = std::move(lm);
    robot_ = std::move(robot);
  }
  FilterState state() const { return {robot_.pose, robot_.cov, lm_.position, lm_.cov}; }

 private:
  MethodVariant method_;
  RobotEstimate robot_;
  LandmarkEstimate lm_;
};

class JointFilter {
 public:
  explicit JointFilter(const SampledTrial& s) {
    est_.state << s.estimate_pose.x, s.estimate_pose.y, s.estimate_pose.theta,
        s.estimate_landmark.x(), s.estimate_landmark.y();
    est_.cov.setZero();
    est_.cov.topLeftCorner<3, 3>() = s.robot_cov;
    est_.cov.bottomRightCorner<2, 2>() = s.landmark_cov;
  }

  void predict(const Twist& u, const TwistNoise& noise, double tau) {
    est_ = joint_predict(est_, u, noise, tau);
  }
  void gps(const PoseMeasurement& y) { est_ = joint_gps_update(est_, y); }
  void bearing(const BearingMeasurement& b) { est_ = joint_bearing_update(est_, b); }
  FilterState state() const {
    return {est_.pose(), est_.cov.topLeftCorner<3, 3>(), est_.landmark(),
            est_.cov.bottomRightCorner<2, 2>()};
  }

 private:
  JointEstimate est_;
};

bool finite_state(const FilterState& s) {
  return std::isfinite(s.pose.x) && std::isfinite(s.pose.y) && std::isfinite(s.pose.theta) &&
         s.robot_cov.allFinite() && s.landmark.allFinite() && s.landmark_cov.allFinite();
}

template <typename Filter>
void run_filter(Filter& filter, const ScenarioConfig& config, const TrialData& data, bool trace,
                MethodOutcome& out) {
  const Eigen::Vector2d& landmark = data.sample.landmark;
  auto record = [&](int step) {
    const FilterState s = filter.state();
    if (!finite_state(s)) throw FusionError("non-finite estimate");
    out.landmark_error_history.push_back((landmark - s.landmark).norm());
    if (trace) out.trace.push_back({step, s.pose, s.landmark});
  };

  record(0);
  for (int k = 0; k < config.steps; ++k) {
    const int t = k + 1;
    filter.predict(data.measured_twist[k], data.sample.twist_noise, config.tau);
    if (data.gps[t]) {
      filter.gps(*data.gps[t]);
      ++out.gps_updates;
    }
    if (data.bearing[t]) {
      filter.bearing(*data.bearing[t]);
      ++out.bearing_updates;
    }
    record(t);
  }

  const FilterState s = filter.state();
  const Eigen::Vector2d e = landmark - s.landmark;
  out.landmark_error = e.norm();
  out.robot_position_error = (data.truth.back().position() - s.pose.position()).norm();
  out.landmark_cov_det = s.landmark_cov.determinant();
  out.landmark_nees = 0.5 * e.dot(s.landmark_cov.ldlt().solve(e));
  if (!std::isfinite(out.landmark_nees)) throw FusionError("non-finite landmark NEES");
}

}  // namespace

TrialRecord run_methods(const ScenarioConfig& config, const TrialData& data, int trial_index,
                        std::uint64_t seed, bool trace) {
  TrialRecord rec;
  rec.trial_index = trial_index;
  rec.seed = seed;
  rec.landmark = data.sample.landmark;
  if (trace) rec.truth = data.truth;

  for (MethodVariant m : config.methods) {
    MethodOutcome out;
    out.method = m;
    try {
      if (m == MethodVariant::Joint) {
        JointFilter f(data.sample);
        run_filter(f, config, data, trace, out);
      } else {
        ModularFilter f(data.sample, m);
        run_filter(f, config, data, trace, out);
      }
    } catch (const std::exception& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out.failed = true;
      out.failure = e.what();
      out.landmark_error = out.robot_position_error = out.landmark_cov_det = out.landmark_nees =
          nan;
    }
    rec.outcomes.push_back(std::move(out));
  }
  return rec;
}

TrialRecord simulate_trial(const ScenarioConfig& config, int trial_index, bool trace) {
  config.validate();
  const std::uint64_t seed = trial_seed(config.seed, static_cast<std::uint64_t>(trial_index));
  Rng rng(seed);
  const TrialData data = generate_trial_data(config, rng);
  return run_methods(config, data, trial_index, seed, trace);
}

// ---------------------------------------------------------------------------

const MethodSummary* StudySummary::find(MethodVariant m) const {
  for (const auto& s : methods)
    if (s.method == m) return &s;
  return nullptr;
}

StudySummary summarize_trials(const std::vector<TrialRecord>& trials,
                              const std::vector<MethodVariant>& methods) {
  StudySummary summary;
  for (MethodVariant m : methods) {
    std::vector<double> values;
    std::size_t failed = 0;
    for (const auto& t : trials) {
      for (const auto& o : t.outcomes) {
        if (o.method != m) continue;
        if (o.failed) {
          ++failed;
        } else {
          values.push_back(o.landmark_error);
        }
      }
    }
    summary.methods.push_back({m, summarize_distribution(values, failed)});
  }
  return summary;
}

StudyResult run_study(const ScenarioConfig& config, const RunOptions& options) {
  config.validate();
  StudyResult result;
  result.trials.resize(static_cast<std::size_t>(config.n_trials));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < config.n_trials; i = next++) {
      const bool trace = options.trace_trial && *options.trace_trial == i;
      result.trials[static_cast<std::size_t>(i)] = simulate_trial(config, i, trace);
    }
  };
  const int threads = std::clamp(options.threads, 1, config.n_trials);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  result.summary = summarize_trials(result.trials, config.methods);
  return result;
}

}  // namespace modfuse
