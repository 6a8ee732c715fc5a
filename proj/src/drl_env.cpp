#include "cartwin/drl/env.hpp"

#include <algorithm>
#include <cmath>

namespace cartwin {

void RewardWeights::validate() const {
  const double ws[] = {m1, m2, m3, m4, m5, m6};
  for (double w : ws) {
    if (!(w >= 0.0)) throw std::invalid_argument("reward: weights must be >= 0");
  }
  if (!(big_m > 0.0)) throw std::invalid_argument("reward: M must be > 0");
  if (!(dy_th_low > 0.0 && dy_th_low < dy_th_high)) {
    throw std::invalid_argument("reward: need 0 < dy_th_low < dy_th_high");
  }
  if (!(dpsi_th > 0.0)) throw std::invalid_argument("reward: dpsi_th > 0");
}

RewardWeights RewardWeights::from_config(const Config& cfg) {
  RewardWeights w;
  w.m1 = cfg.get_double("drl.m1", w.m1);
  w.m2 = cfg.get_double("drl.m2", w.m2);
  w.m3 = cfg.get_double("drl.m3", w.m3);
  w.m4 = cfg.get_double("drl.m4", w.m4);
  w.m5 = cfg.get_double("drl.m5", w.m5);
  w.m6 = cfg.get_double("drl.m6", w.m6);
  w.big_m = cfg.get_double("drl.big_m", w.big_m);
  w.dy_th_low = cfg.get_double("drl.dy_th_low", w.dy_th_low);
  w.dy_th_high = cfg.get_double("drl.dy_th_high", w.dy_th_high);
  w.dpsi_th = cfg.get_double("drl.dpsi_th", w.dpsi_th);
  w.validate();
  return w;
}

RewardResult reward(const TrackingErrors& errors, double delta_dot,
                    double delta, double delta_ed, const RewardWeights& w) {
  RewardResult out;
  const double ady = std::abs(errors.dy);
  double r_y;
  if (ady <= w.dy_th_low) {
    r_y = -w.m1 * std::log(w.dy_th_low);
  } else if (ady < w.dy_th_high) {
    r_y = -w.m2 * std::log(ady);
  } else {
    r_y = -w.big_m;
    out.terminal = true;
  }
  const double adpsi = std::abs(errors.dpsi);
  const double r_psi = adpsi <= w.dpsi_th ? -w.m3 * std::log(w.dpsi_th)
                                          : -w.m4 * std::log(adpsi);
  const double r_rate = -w.m5 * std::abs(delta_dot);
  const double r_ed = -w.m6 * std::abs(delta_ed - delta);
  out.value = r_y + r_psi + r_rate + r_ed;
  return out;
}

PathTrackingEnv::PathTrackingEnv(const Path& path, const EnvConfig& cfg)
    : path_(&path), cfg_(cfg), speed_(PiGains{}) {
  cfg_.weights.validate();
  expert_ = std::make_unique<LqSteering>(cfg_.vehicle.chassis, cfg_.lq_q,
                                         cfg_.lq_r, cfg_.v_ref,
                                         LqSteering::Mode::Feedback);
  const double nominal_steps = path.length() / (cfg_.v_ref * kTick);
  step_cap_ = static_cast<int>(std::ceil(nominal_steps * cfg_.step_cap_margin));
  // armature voltage that holds v_ref at steady state
  const MotorParams& m = cfg_.vehicle.motor;
  steady_va_ = (cfg_.v_ref / m.speed_gain() + m.dc_offset()) / m.dc_slope();
  reset(0.0);
}

Eigen::Vector4d PathTrackingEnv::reset(double dy_offset) {
  const PathPoint start = path_->lookup(cfg_.s_start);
  state_ = BicycleState{};
  state_.x = start.x - dy_offset * std::sin(start.psi);
  state_.y = start.y + dy_offset * std::cos(start.psi);
  state_.psi = start.psi;
  state_.v = cfg_.v_ref;
  s_ = cfg_.s_start;
  delta_ = 0.0;
  // preload the integrator so the speed loop starts trimmed
  speed_.reset(PiGains{}.ki > 0.0 ? steady_va_ / PiGains{}.ki : 0.0);
  refresh_errors();
  return observation();
}

Eigen::Vector4d PathTrackingEnv::reset_random(RngStream& rng) {
  return reset(rng.uniform(-cfg_.init_offset, cfg_.init_offset));
}

void PathTrackingEnv::refresh_errors() {
  const PathPoint ref = path_->lookup(s_);
  errors_ = tracking_errors(state_, ref);
  expert_delta_ = expert_->update(errors_, ref.kappa, state_.v);
}

Eigen::Vector4d PathTrackingEnv::observation() const {
  Eigen::Vector4d raw(errors_.dy, errors_.dy_dot, errors_.dpsi, errors_.dr);
  return raw.cwiseQuotient(cfg_.obs_norm);
}

PathTrackingEnv::StepResult PathTrackingEnv::step(double delta_dot) {
  delta_dot = std::clamp(delta_dot, -cfg_.delta_dot_max, cfg_.delta_dot_max);
  delta_ = std::clamp(delta_ + delta_dot * kTick,
                      -cfg_.vehicle.chassis.delta_max,
                      cfg_.vehicle.chassis.delta_max);
  const double va = speed_.update(cfg_.v_ref, state_.v, kTick);
  const ControlInput u{va, delta_};

  // advance the arc-length coordinate, then the twin
  const PathPoint ref = path_->lookup(s_);
  const double s_dot = travelled_distance_rate(state_, errors_, ref);
  s_ += s_dot * kTick;
  state_ = rk4_step(state_, kTick, [&](const BicycleState& s) {
    return bicycle_derivative(s, u, cfg_.vehicle.chassis, cfg_.vehicle.motor);
  });
  refresh_errors();

  StepResult res;
  const RewardResult rr =
      reward(errors_, delta_dot, delta_, expert_delta_, cfg_.weights);
  res.reward = rr.value;
  res.terminal = rr.terminal;
  res.completed = s_ >= path_->length();
  res.obs = observation();
  return res;
}

}  // namespace cartwin
