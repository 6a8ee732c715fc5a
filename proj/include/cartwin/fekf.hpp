#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cartwin/io/config.hpp"
#include "cartwin/sensors.hpp"
#include "cartwin/vehicle.hpp"

namespace cartwin {

/// Mean/covariance pair of a local filter. The covariance is kept
/// symmetric; the mean's heading entry (bicycle model) stays unwrapped.
struct EkfEstimate {
  Eigen::VectorXd x;
  Eigen::MatrixXd p;
  double t = 0.0;
};

/// One scalar measurement channel: state index, value, variance, and
/// whether the innovation is an angle to be wrapped.
struct ScalarMeasurement {
  int index = 0;
  double value = 0.0;
  double variance = 1.0;
  bool angular = false;
};

/// Sequential scalar Joseph-form updates over the given channels.
/// An empty list is a no-op.
EkfEstimate ekf_update(const EkfEstimate& est,
                       const std::vector<ScalarMeasurement>& channels);

/// Bicycle-model prediction: mean by one RK4 step, covariance by
/// F P F' + Q with F the central-difference Jacobian of the discrete map.
EkfEstimate ekf_predict_bm(const EkfEstimate& est, const ControlInput& u,
                           double dt, const Eigen::MatrixXd& q,
                           const VehicleParams& params);

/// Point-model prediction driven by body accelerations rotated through an
/// externally supplied heading. The discrete Jacobian is analytic.
EkfEstimate ekf_predict_pm(const EkfEstimate& est, double ax_body,
                           double ay_body, double psi, double dt,
                           const Eigen::MatrixXd& q);

/// Fused position from the two local position blocks by information
/// addition. `used` reports which filters contributed (fallback when a
/// block is numerically singular).
struct FusedPosition {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  enum class Source { Both, BmOnly, PmOnly } used = Source::Both;
};

FusedPosition master_fuse(const EkfEstimate& bm, const EkfEstimate& pm);

/// Heading source for the point-model filter.
enum class PsiSource { LidarHeld, BicycleEstimate };

struct FekfConfig {
  Eigen::VectorXd q_bm = (Eigen::VectorXd(6) << 1e-8, 1e-8, 1e-7, 1e-8, 1e-8,
                          1e-8)
                             .finished();
  double q_pm_floor = 1e-10;
  double q_pm_accel_inflation = 2.0;  // scales the IMU-noise-driven Q
  double p0_pos = 1e-4;
  double p0_vel = 1e-4;
  double p0_angle = 1e-4;
  PsiSource psi_source = PsiSource::LidarHeld;

  static FekfConfig from_config(const Config& cfg);
};

/// Local bicycle-model filter over [X, Y, v, psi, beta, r]; updates v and
/// r every tick (encoder, gyro) and X, Y, psi on lidar ticks with
/// variances from the score map. Each step predicts with the inputs that
/// were active over the elapsed tick, then corrects with the new frame.
class BmFilter {
 public:
  BmFilter(const VehicleParams& params, const SensorConfig& sensors,
           const FekfConfig& cfg, const Eigen::VectorXd& x0);

  /// `u_current` becomes the prediction input of the next step.
  void step(const SensorFrame& frame, const ControlInput& u_current);
  const EkfEstimate& estimate() const { return est_; }

 private:
  VehicleParams params_;
  SensorConfig sensors_;
  FekfConfig cfg_;
  EkfEstimate est_;
  Eigen::MatrixXd q_;
  ControlInput prev_u_;
  bool has_prev_ = false;
};

/// Local point-model filter over [X, Y, Vx, Vy]; predicts with measured
/// IMU accelerations and updates X, Y on lidar ticks.
class PmFilter {
 public:
  PmFilter(const SensorConfig& sensors, const FekfConfig& cfg,
           const Eigen::VectorXd& x0, double psi0 = 0.0);

  /// psi_external is consulted only when the source is BicycleEstimate.
  void step(const SensorFrame& frame, double psi_external);
  const EkfEstimate& estimate() const { return est_; }
  double held_psi() const { return held_psi_; }

 private:
  SensorConfig sensors_;
  FekfConfig cfg_;
  EkfEstimate est_;
  double held_psi_ = 0.0;
  double prev_ax_ = 0.0;
  double prev_ay_ = 0.0;
  bool has_prev_ = false;
};

/// Normalized estimation error squared against ground truth; angular
/// entries are wrapped before weighting.
double nees(const EkfEstimate& est, const Eigen::VectorXd& truth,
            const std::vector<int>& angular_indices);

}  // namespace cartwin
