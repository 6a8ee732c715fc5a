#pragma once

#include <Eigen/Dense>

#include "cartwin/io/config.hpp"
#include "cartwin/paths.hpp"
#include "cartwin/vehicle.hpp"

namespace cartwin {

/// Linear lateral error dynamics in x_e = [dy, dy_dot, dpsi, dr] with the
/// steering angle as input, plus the zero-order-hold discretization.
struct ErrorStateModel {
  Eigen::Matrix4d a;   // continuous
  Eigen::Vector4d b;
  Eigen::Matrix4d ad;  // discrete (ZOH at dt)
  Eigen::Vector4d bd;
  double v_design = 0.0;
  double dt = kTick;
};

ErrorStateModel error_state_model(double v, const ChassisParams& cp,
                                  double dt = kTick);

/// Matrix exponential by scaling-and-squaring over a 6-term Taylor series.
Eigen::MatrixXd expm(const Eigen::MatrixXd& m);

struct LqGain {
  Eigen::RowVector4d k;
  Eigen::Matrix4d q;
  double r = 1.0;
  double v_design = 0.0;
};

/// Discrete-time Riccati fixed point
///   P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q,    K = (R + B'PB)^-1 B'PA,
/// started from P = Q and iterated until the update is below 1e-10.
/// Throws NumericalError on non-convergence or an unstable closed loop.
LqGain solve_discrete_riccati(const Eigen::Matrix4d& ad,
                              const Eigen::Vector4d& bd,
                              const Eigen::Matrix4d& q, double r);

/// Spectral radius of ad - bd*k.
double closed_loop_radius(const Eigen::Matrix4d& ad, const Eigen::Vector4d& bd,
                          const Eigen::RowVector4d& k);

/// Steering needed for steady cornering at curvature kappa; equals
/// kappa * k_su * v^2 with the understeer gradient of ChassisParams and
/// is independent of speed: kappa * (cf lf^2 + cr lr^2) / (cf lf).
double steady_state_steer(double kappa_ref, const ChassisParams& cp);

/// Steady heading offset while cornering (the velocity vector must stay
/// tangent, so dpsi_ss = -beta_ss).
double steady_state_heading_error(double kappa_ref, double v,
                                  const ChassisParams& cp);

/// Pure LQ state feedback, delta = clamp(-K x_e).
double lq_ed(const TrackingErrors& xe, const LqGain& gain,
             const ChassisParams& cp);

/// LQ with a curvature feedforward compensating both the steady steering
/// demand and the feedback's reaction to the steady heading offset, so the
/// lateral error is zero in constant cornering.
double lq_cm(const TrackingErrors& xe, const LqGain& gain, double kappa_ref,
             double v, const ChassisParams& cp);

struct FfFbParams {
  double k_y = 1.0;        // 1/m feedback gain on the blended error
  double look_ahead = 0.3; // m
};

/// Feedforward-feedback steering: curvature feedforward plus a
/// proportional correction on dy + d_la * dpsi.
double ff_fb(const TrackingErrors& xe, double kappa_ref, double v,
             const ChassisParams& cp, const FfFbParams& p);

/// Slew-limit a steering command against the previous value, then clamp.
double rate_limit_and_saturate(double delta_cmd, double delta_prev, double dt,
                               double rate_max, double delta_max);

struct PiGains {
  double kp = 0.02;
  double ki = 0.25;
  double va_min = 0.0;
  double va_max = 6.0;

  static PiGains from_config(const Config& cfg);
};

/// PI speed loop with conditional-integration anti-windup: the integrator
/// freezes whenever the output is saturated in the direction of the error.
class PiSpeedControl {
 public:
  explicit PiSpeedControl(const PiGains& gains) : gains_(gains) {}

  double update(double v_ref, double v, double dt);
  void reset(double integrator = 0.0) { integrator_ = integrator; }
  double integrator() const { return integrator_; }

 private:
  PiGains gains_;
  double integrator_ = 0.0;
};

/// Gain-scheduled LQ steering wrapper: the gain is recomputed whenever the
/// speed drifts more than 0.05 m/s from the design speed.
class LqSteering {
 public:
  enum class Mode { Feedback, CurvatureCompensated };

  LqSteering(const ChassisParams& cp, const Eigen::Matrix4d& q, double r,
             double v_design, Mode mode, double dt = kTick);

  double update(const TrackingErrors& xe, double kappa_ref, double v);
  const LqGain& gain() const { return gain_; }

 private:
  ChassisParams cp_;
  Eigen::Matrix4d q_;
  double r_;
  double dt_;
  Mode mode_;
  LqGain gain_;
};

struct LqWeights {
  Eigen::Matrix4d q;
  double r;

  static LqWeights from_config(const Config& cfg);
};

}  // namespace cartwin
