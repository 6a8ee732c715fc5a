#include "cartwin/fekf.hpp"

#include <cmath>

#include "cartwin/errors.hpp"

namespace cartwin {

namespace {

void check_finite(const EkfEstimate& est, const char* where) {
  if (!est.x.allFinite() || !est.p.allFinite()) {
    throw NumericalError(std::string(where) + ": non-finite estimate");
  }
}

BicycleState to_state(const Eigen::VectorXd& x) {
  return {x(0), x(1), x(2), x(3), x(4), x(5)};
}

Eigen::VectorXd to_vector(const BicycleState& s) {
  Eigen::VectorXd x(6);
  x << s.x, s.y, s.v, s.psi, s.beta, s.r;
  return x;
}

Eigen::VectorXd bm_discrete_map(const Eigen::VectorXd& x,
                                const ControlInput& u, double dt,
                                const VehicleParams& params) {
  const BicycleState next = rk4_step(
      to_state(x), dt, [&](const BicycleState& s) {
        return bicycle_derivative(s, u, params.chassis, params.motor);
      });
  return to_vector(next);
}

}  // namespace

EkfEstimate ekf_update(const EkfEstimate& est,
                       const std::vector<ScalarMeasurement>& channels) {
  EkfEstimate out = est;
  const Eigen::Index n = out.x.size();
  for (const auto& m : channels) {
    if (m.index < 0 || m.index >= n) {
      throw std::invalid_argument("ekf_update: channel index out of range");
    }
    double innov = m.value - out.x(m.index);
    if (m.angular) innov = wrap_angle(innov);
    const double s = out.p(m.index, m.index) + m.variance;
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw NumericalError("ekf_update: non-positive innovation variance");
    }
    const Eigen::VectorXd k = out.p.col(m.index) / s;
    out.x += k * innov;
    Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(n, n);
    ikh.col(m.index) -= k;
    out.p = ikh * out.p * ikh.transpose() + m.variance * (k * k.transpose());
    out.p = 0.5 * (out.p + out.p.transpose()).eval();
  }
  check_finite(out, "ekf_update");
  return out;
}

EkfEstimate ekf_predict_bm(const EkfEstimate& est, const ControlInput& u,
                           double dt, const Eigen::MatrixXd& q,
                           const VehicleParams& params) {
  if (est.x.size() != 6) {
    throw std::invalid_argument("ekf_predict_bm: state must have 6 entries");
  }
  EkfEstimate out = est;
  out.x = bm_discrete_map(est.x, u, dt, params);

  // Central-difference Jacobian of the discrete map.
  Eigen::MatrixXd f(6, 6);
  for (int j = 0; j < 6; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(est.x(j)));
    Eigen::VectorXd xp = est.x, xm = est.x;
    xp(j) += h;
    xm(j) -= h;
    f.col(j) = (bm_discrete_map(xp, u, dt, params) -
                bm_discrete_map(xm, u, dt, params)) /
               (2.0 * h);
  }
  out.p = f * est.p * f.transpose() + q;
  out.p = 0.5 * (out.p + out.p.transpose()).eval();
  out.t = est.t + dt;
  check_finite(out, "ekf_predict_bm");
  return out;
}

EkfEstimate ekf_predict_pm(const EkfEstimate& est, double ax_body,
                           double ay_body, double psi, double dt,
                           const Eigen::MatrixXd& q) {
  if (est.x.size() != 4) {
    throw std::invalid_argument("ekf_predict_pm: state must have 4 entries");
  }
  EkfEstimate out = est;
  const PointState next =
      rk4_step(PointState{est.x(0), est.x(1), est.x(2), est.x(3)}, dt,
               [&](const PointState& s) {
                 return point_derivative(s, ax_body, ay_body, psi);
               });
  out.x << next.x, next.y, next.vx, next.vy;
  // The map is linear with a nilpotent A, so F = I + A dt exactly.
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  out.p = f * est.p * f.transpose() + q;
  out.p = 0.5 * (out.p + out.p.transpose()).eval();
  out.t = est.t + dt;
  check_finite(out, "ekf_predict_pm");
  return out;
}

namespace {

bool invert2(const Eigen::Matrix2d& m, Eigen::Matrix2d& inv) {
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double scale = m.cwiseAbs().maxCoeff();
  if (!(std::abs(det) > 1e-14 * std::max(1.0, scale * scale)) ||
      !std::isfinite(det)) {
    return false;
  }
  inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  inv /= det;
  return true;
}

}  // namespace

FusedPosition master_fuse(const EkfEstimate& bm, const EkfEstimate& pm) {
  const Eigen::Vector2d p_bm = bm.x.head<2>();
  const Eigen::Vector2d p_pm = pm.x.head<2>();
  const Eigen::Matrix2d c_bm = bm.p.topLeftCorner<2, 2>();
  const Eigen::Matrix2d c_pm = pm.p.topLeftCorner<2, 2>();

  Eigen::Matrix2d i_bm, i_pm;
  const bool ok_bm = invert2(c_bm, i_bm);
  const bool ok_pm = invert2(c_pm, i_pm);

  FusedPosition out;
  if (!ok_bm && !ok_pm) {
    throw NumericalError("master_fuse: both position blocks singular");
  }
  if (!ok_pm) {
    out.p = p_bm;
    out.cov = c_bm;
    out.used = FusedPosition::Source::BmOnly;
    return out;
  }
  if (!ok_bm) {
    out.p = p_pm;
    out.cov = c_pm;
    out.used = FusedPosition::Source::PmOnly;
    return out;
  }
  Eigen::Matrix2d info = i_bm + i_pm;
  Eigen::Matrix2d cov;
  if (!invert2(info, cov)) {
    throw NumericalError("master_fuse: information matrix singular");
  }
  out.cov = 0.5 * (cov + cov.transpose());
  out.p = out.cov * (i_bm * p_bm + i_pm * p_pm);
  out.used = FusedPosition::Source::Both;
  return out;
}

FekfConfig FekfConfig::from_config(const Config& cfg) {
  FekfConfig f;
  const std::vector<double> q = cfg.get_doubles(
      "fekf.q_bm", {1e-8, 1e-8, 1e-7, 1e-8, 1e-8, 1e-8});
  if (q.size() != 6) throw std::invalid_argument("fekf.q_bm needs 6 values");
  for (int i = 0; i < 6; ++i) f.q_bm(i) = q[i];
  f.q_pm_floor = cfg.get_double("fekf.q_pm_floor", f.q_pm_floor);
  f.q_pm_accel_inflation =
      cfg.get_double("fekf.q_pm_accel_inflation", f.q_pm_accel_inflation);
  f.p0_pos = cfg.get_double("fekf.p0_pos", f.p0_pos);
  f.p0_vel = cfg.get_double("fekf.p0_vel", f.p0_vel);
  f.p0_angle = cfg.get_double("fekf.p0_angle", f.p0_angle);
  const std::string src = cfg.get_string("fekf.psi_source", "lidar");
  if (src == "lidar") {
    f.psi_source = PsiSource::LidarHeld;
  } else if (src == "bm") {
    f.psi_source = PsiSource::BicycleEstimate;
  } else {
    throw std::invalid_argument("fekf.psi_source must be lidar or bm");
  }
  return f;
}

BmFilter::BmFilter(const VehicleParams& params, const SensorConfig& sensors,
                   const FekfConfig& cfg, const Eigen::VectorXd& x0)
    : params_(params), sensors_(sensors), cfg_(cfg) {
  est_.x = x0;
  est_.p = Eigen::MatrixXd::Zero(6, 6);
  est_.p.diagonal() << cfg.p0_pos, cfg.p0_pos, cfg.p0_vel, cfg.p0_angle,
      cfg.p0_angle, cfg.p0_angle;
  q_ = cfg.q_bm.asDiagonal();
}

void BmFilter::step(const SensorFrame& frame, const ControlInput& u_current) {
  if (has_prev_) {
    est_ = ekf_predict_bm(est_, prev_u_, kTick, q_, params_);
  }
  std::vector<ScalarMeasurement> ms;
  const double gain = params_.motor.speed_gain();
  const double rv = gain * sensors_.encoder_std;
  ms.push_back({2, gain * frame.encoder_omega, rv * rv, false});
  ms.push_back({5, frame.gyro_r,
                sensors_.imu_gyro_std * sensors_.imu_gyro_std, false});
  if (frame.lidar) {
    const auto& l = *frame.lidar;
    ms.push_back({0, l.x, lidar_variance(l.score, sensors_.map_x), false});
    ms.push_back({1, l.y, lidar_variance(l.score, sensors_.map_y), false});
    ms.push_back({3, l.psi, lidar_variance(l.score, sensors_.map_psi), true});
  }
  est_ = ekf_update(est_, ms);
  est_.t = frame.t;
  prev_u_ = u_current;
  has_prev_ = true;
}

PmFilter::PmFilter(const SensorConfig& sensors, const FekfConfig& cfg,
                   const Eigen::VectorXd& x0, double psi0)
    : sensors_(sensors), cfg_(cfg), held_psi_(psi0) {
  est_.x = x0;
  est_.p = Eigen::MatrixXd::Zero(4, 4);
  est_.p.diagonal() << cfg.p0_pos, cfg.p0_pos, cfg.p0_vel, cfg.p0_vel;
}

void PmFilter::step(const SensorFrame& frame, double psi_external) {
  if (has_prev_) {
    const double psi = cfg_.psi_source == PsiSource::BicycleEstimate
                           ? psi_external
                           : held_psi_;
    // Q carries the measured-acceleration noise through the kinematics.
    const double dt = kTick;
    const double sa2 = sensors_.imu_accel_std * sensors_.imu_accel_std *
                       cfg_.q_pm_accel_inflation;
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    const double q_pp = sa2 * dt * dt * dt * dt / 4.0;
    const double q_pv = sa2 * dt * dt * dt / 2.0;
    const double q_vv = sa2 * dt * dt;
    q(0, 0) = q(1, 1) = q_pp + cfg_.q_pm_floor;
    q(2, 2) = q(3, 3) = q_vv + cfg_.q_pm_floor;
    q(0, 2) = q(2, 0) = q_pv;
    q(1, 3) = q(3, 1) = q_pv;
    est_ = ekf_predict_pm(est_, prev_ax_, prev_ay_, psi, dt, q);
  }
  if (frame.lidar) {
    const auto& l = *frame.lidar;
    std::vector<ScalarMeasurement> ms;
    ms.push_back({0, l.x, lidar_variance(l.score, sensors_.map_x), false});
    ms.push_back({1, l.y, lidar_variance(l.score, sensors_.map_y), false});
    est_ = ekf_update(est_, ms);
    held_psi_ = l.psi;
  }
  est_.t = frame.t;
  prev_ax_ = frame.ax;
  prev_ay_ = frame.ay;
  has_prev_ = true;
}

double nees(const EkfEstimate& est, const Eigen::VectorXd& truth,
            const std::vector<int>& angular_indices) {
  Eigen::VectorXd err = est.x - truth;
  for (int idx : angular_indices) err(idx) = wrap_angle(err(idx));
  const Eigen::MatrixXd p = est.p;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(p);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("nees: covariance not decomposable");
  }
  return err.dot(ldlt.solve(err));
}

}  // namespace cartwin
