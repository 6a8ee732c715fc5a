#pragma once

#include <optional>

#include "cartwin/io/config.hpp"
#include "cartwin/rng.hpp"
#include "cartwin/vehicle.hpp"

namespace cartwin {

/// Coefficients of the score-to-variance map
/// R(ls) = k1 * tanh(k2/ls - k3) + k4 for one lidar channel.
struct ScoreMap {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;
};

/// Variance of a lidar channel given its quality score; strictly
/// decreasing in the score. Throws std::domain_error for score <= 0.
double lidar_variance(double score, const ScoreMap& map);

struct SensorConfig {
  double imu_accel_std = 0.05;     // m/s^2
  double imu_gyro_std = 0.01;      // rad/s
  double encoder_std = 0.01;       // rad/s on motor speed
  double lidar_pos_std = 0.03;     // m, at nominal score
  double lidar_heading_std = 0.02; // rad, at nominal score
  double spike_probability = 0.01; // per lidar sample
  double spike_mag_min = 0.3;      // m
  double spike_mag_max = 1.0;      // m
  double score_nominal = 100.0;
  double score_on_spike = 10.0;
  double score_jitter = 0.05;      // multiplicative, clamped to +-3 sigma
  int lidar_every = 10;            // lidar tick period in IMU ticks

  ScoreMap map_x, map_y, map_psi;

  /// Derive map coefficients so that the variance at the nominal score is
  /// exactly std^2, the variance at the spike score is about 200x that,
  /// and the map stays positive for every score.
  static ScoreMap nominal_map(double std, double score_nominal);
  void derive_maps();
  void validate() const;
  static SensorConfig from_config(const Config& cfg);
};

struct LidarSample {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;   // wrapped to (-pi, pi]
  double score = 0.0;
  bool spiked = false;
};

/// One multi-rate measurement snapshot: IMU and encoder every tick,
/// lidar only when tick % lidar_every == 0.
struct SensorFrame {
  double t = 0.0;
  int tick = 0;
  double ax = 0.0;             // m/s^2, body frame
  double ay = 0.0;
  double gyro_r = 0.0;         // rad/s
  double encoder_omega = 0.0;  // rad/s, motor side
  std::optional<LidarSample> lidar;
};

/// Draws noisy frames from ground truth. One owned RNG stream; identical
/// seeds give bitwise-identical frame sequences.
class SensorSimulator {
 public:
  SensorSimulator(const SensorConfig& cfg, const MotorParams& motor,
                  std::uint64_t seed);

  SensorFrame sample(const BicycleState& truth, double ax_body, double ay_body,
                     int tick);

  const SensorConfig& config() const { return cfg_; }

 private:
  SensorConfig cfg_;
  MotorParams motor_;
  RngStream rng_;
};

}  // namespace cartwin
