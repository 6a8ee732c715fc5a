#pragma once

#include <Eigen/Dense>
#include <memory>

#include "cartwin/control.hpp"
#include "cartwin/io/config.hpp"
#include "cartwin/paths.hpp"
#include "cartwin/rng.hpp"
#include "cartwin/vehicle.hpp"

namespace cartwin {

/// Weights and thresholds of the four-term tracking reward.
struct RewardWeights {
  double m1 = 1.0;
  double m2 = 1.0;
  double m3 = 0.5;
  double m4 = 0.5;
  double m5 = 0.05;
  double m6 = 0.5;
  double big_m = 100.0;
  double dy_th_low = 0.03;   // m
  double dy_th_high = 0.30;  // m
  double dpsi_th = 0.10;     // rad

  void validate() const;
  static RewardWeights from_config(const Config& cfg);
};

struct RewardResult {
  double value = 0.0;
  bool terminal = false;
};

/// Reward for one transition: lateral-error term (flat plateau inside the
/// inner threshold, log barrier in between, -M and termination past the
/// outer threshold), heading term, steering-rate penalty, and the
/// mismatch with the demonstrator's steering angle.
RewardResult reward(const TrackingErrors& errors, double delta_dot,
                    double delta, double delta_ed, const RewardWeights& w);

struct EnvConfig {
  VehicleParams vehicle;
  RewardWeights weights;
  Eigen::Matrix4d lq_q = Eigen::Vector4d(30.0, 1.0, 20.0, 1.0).asDiagonal();
  double lq_r = 20.0;
  double v_ref = 0.5;                 // m/s
  double delta_dot_max = 1.221730;    // rad/s, about 70 deg/s
  Eigen::Vector4d obs_norm = Eigen::Vector4d(0.3, 1.0, 0.5, 2.0);
  double init_offset = 0.05;          // m, |dy(0)| upper bound
  double step_cap_margin = 1.2;       // episode cap vs nominal duration
  double s_start = 0.0;
};

/// Path-tracking environment over the digital twin: the action is the
/// steering rate, the observation is the normalized error vector, speed
/// is held by a PI loop, and the demonstrator action comes from the LQ
/// feedback law evaluated on the same errors.
class PathTrackingEnv {
 public:
  PathTrackingEnv(const Path& path, const EnvConfig& cfg);

  Eigen::Vector4d reset(double dy_offset);
  Eigen::Vector4d reset_random(RngStream& rng);

  struct StepResult {
    Eigen::Vector4d obs = Eigen::Vector4d::Zero();
    double reward = 0.0;
    bool terminal = false;   // outer lateral threshold crossed
    bool completed = false;  // end of path (or one lap) reached
  };

  StepResult step(double delta_dot);

  int step_cap() const { return step_cap_; }
  double delta() const { return delta_; }
  double expert_delta() const { return expert_delta_; }
  double travelled() const { return s_; }
  const TrackingErrors& errors() const { return errors_; }
  const BicycleState& state() const { return state_; }
  const Path& path() const { return *path_; }
  const EnvConfig& config() const { return cfg_; }

  Eigen::Vector4d observation() const;

 private:
  void refresh_errors();

  const Path* path_;
  EnvConfig cfg_;
  std::unique_ptr<LqSteering> expert_;
  PiSpeedControl speed_;
  BicycleState state_;
  TrackingErrors errors_;
  double s_ = 0.0;
  double delta_ = 0.0;
  double expert_delta_ = 0.0;
  int step_cap_ = 0;
  double steady_va_ = 0.0;
};

}  // namespace cartwin
