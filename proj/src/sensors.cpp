#include "cartwin/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cartwin {

double lidar_variance(double score, const ScoreMap& map) {
  if (!(score > 0.0)) {
    throw std::domain_error("lidar_variance: score must be > 0");
  }
  return map.k1 * std::tanh(map.k2 / score - map.k3) + map.k4;
}

ScoreMap SensorConfig::nominal_map(double std, double score_nominal) {
  // Anchor the transition so the nominal score sits at tanh(-3): steep
  // growth toward low scores, a gentle positive tail toward high scores.
  ScoreMap m;
  const double var = std * std;
  m.k1 = 100.0 * var;
  m.k2 = 5.0 * score_nominal;
  m.k3 = 8.0;
  m.k4 = var * (1.0 + 100.0 * std::tanh(3.0));
  return m;
}

void SensorConfig::derive_maps() {
  map_x = nominal_map(lidar_pos_std, score_nominal);
  map_y = nominal_map(lidar_pos_std, score_nominal);
  map_psi = nominal_map(lidar_heading_std, score_nominal);
}

void SensorConfig::validate() const {
  auto nonneg = [](double v, const char* msg) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(msg);
  };
  nonneg(imu_accel_std, "sensors: imu_accel_std");
  nonneg(imu_gyro_std, "sensors: imu_gyro_std");
  nonneg(encoder_std, "sensors: encoder_std");
  nonneg(lidar_pos_std, "sensors: lidar_pos_std");
  nonneg(lidar_heading_std, "sensors: lidar_heading_std");
  if (!(spike_probability >= 0.0 && spike_probability <= 1.0)) {
    throw std::invalid_argument("sensors: spike_probability in [0,1]");
  }
  if (!(spike_mag_min >= 0.0 && spike_mag_max >= spike_mag_min)) {
    throw std::invalid_argument("sensors: spike magnitude range");
  }
  if (!(score_nominal > 0.0 && score_on_spike > 0.0)) {
    throw std::invalid_argument("sensors: scores must be > 0");
  }
  if (lidar_every < 1) throw std::invalid_argument("sensors: lidar_every");
  for (const auto* m : {&map_x, &map_y, &map_psi}) {
    if (m->k1 < 0.0 || m->k2 <= 0.0 || m->k3 <= 0.0 || m->k4 < 0.0) {
      throw std::invalid_argument("sensors: score map coefficients");
    }
  }
}

SensorConfig SensorConfig::from_config(const Config& cfg) {
  SensorConfig s;
  s.imu_accel_std = cfg.get_double("sensors.imu_accel_std", s.imu_accel_std);
  s.imu_gyro_std = cfg.get_double("sensors.imu_gyro_std", s.imu_gyro_std);
  s.encoder_std = cfg.get_double("sensors.encoder_std", s.encoder_std);
  s.lidar_pos_std = cfg.get_double("sensors.lidar_pos_std", s.lidar_pos_std);
  s.lidar_heading_std =
      cfg.get_double("sensors.lidar_heading_std", s.lidar_heading_std);
  s.spike_probability =
      cfg.get_double("sensors.spike_probability", s.spike_probability);
  s.spike_mag_min = cfg.get_double("sensors.spike_mag_min", s.spike_mag_min);
  s.spike_mag_max = cfg.get_double("sensors.spike_mag_max", s.spike_mag_max);
  s.score_nominal = cfg.get_double("sensors.score_nominal", s.score_nominal);
  s.score_on_spike = cfg.get_double("sensors.score_on_spike", s.score_on_spike);
  s.score_jitter = cfg.get_double("sensors.score_jitter", s.score_jitter);
  s.lidar_every = cfg.get_int("sensors.lidar_every", s.lidar_every);
  s.derive_maps();
  s.validate();
  return s;
}

SensorSimulator::SensorSimulator(const SensorConfig& cfg,
                                 const MotorParams& motor, std::uint64_t seed)
    : cfg_(cfg), motor_(motor), rng_(seed) {
  cfg_.validate();
}

SensorFrame SensorSimulator::sample(const BicycleState& truth, double ax_body,
                                    double ay_body, int tick) {
  SensorFrame f;
  f.tick = tick;
  f.t = tick * kTick;
  f.ax = ax_body + rng_.gaussian(0.0, cfg_.imu_accel_std);
  f.ay = ay_body + rng_.gaussian(0.0, cfg_.imu_accel_std);
  f.gyro_r = truth.r + rng_.gaussian(0.0, cfg_.imu_gyro_std);
  const double omega_true = truth.v / motor_.speed_gain();
  f.encoder_omega = omega_true + rng_.gaussian(0.0, cfg_.encoder_std);

  if (tick % cfg_.lidar_every == 0) {
    LidarSample ls;
    const double jitter = std::clamp(rng_.gaussian(0.0, 1.0), -3.0, 3.0);
    ls.score = cfg_.score_nominal * (1.0 + cfg_.score_jitter * jitter);
    const bool spike = rng_.uniform01() < cfg_.spike_probability;
    if (spike) {
      ls.spiked = true;
      ls.score = cfg_.score_on_spike;
      const double direction = rng_.uniform(0.0, 2.0 * M_PI);
      const double mag = rng_.uniform(cfg_.spike_mag_min, cfg_.spike_mag_max);
      ls.x = truth.x + mag * std::cos(direction);
      ls.y = truth.y + mag * std::sin(direction);
      ls.psi = wrap_angle(truth.psi +
                          rng_.gaussian(0.0, cfg_.lidar_heading_std));
    } else {
      // Channel noise follows the variance the score advertises, so the
      // score map and the realized noise stay consistent.
      const double sx = std::sqrt(lidar_variance(ls.score, cfg_.map_x));
      const double sy = std::sqrt(lidar_variance(ls.score, cfg_.map_y));
      const double sp = std::sqrt(lidar_variance(ls.score, cfg_.map_psi));
      ls.x = truth.x + rng_.gaussian(0.0, sx);
      ls.y = truth.y + rng_.gaussian(0.0, sy);
      ls.psi = wrap_angle(truth.psi + rng_.gaussian(0.0, sp));
    }
    f.lidar = ls;
  }
  return f;
}

}  // namespace cartwin
