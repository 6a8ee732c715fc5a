#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "cartwin/vehicle.hpp"

namespace cartwin {

enum class ExperimentKind { Longitudinal, Lateral };

/// One step-response record sampled at the 10 ms tick: motor speed for
/// voltage steps, lateral acceleration for steering steps.
struct StepExperiment {
  double input_level = 0.0;  // V or rad
  double dt = kTick;
  std::vector<double> samples;
  ExperimentKind kind = ExperimentKind::Longitudinal;

  double duration() const { return (samples.size() - 1) * dt; }
};

struct SteadyStatePoint {
  double input = 0.0;
  double output = 0.0;
};

struct LongitudinalFit {
  double m_l = 0.0;  // rad/(s V)
  double b_l = 0.0;  // rad/s
  double p2 = 0.0;
  double p1 = 0.0;   // = m_l * p2
  double p3 = 0.0;   // = b_l * p2
  double cost = 0.0;
};

struct LateralFit {
  double k_su = 0.0;
  double cf = 0.0;
  double cr = 0.0;  // from the understeer constraint
  double cost = 0.0;
};

/// Zero-phase moving average (centered window, shrinking at the edges).
std::vector<double> moving_average(const std::vector<double>& x, int window);

/// Ordinary least squares for the steady-state line w = m_l * u - b_l.
/// Needs at least two distinct inputs.
std::pair<double, double> fit_steady_state_line(
    const std::vector<SteadyStatePoint>& points);

/// Through-origin least squares of a = (1/k_su) * delta;
/// k_su = sum(delta^2) / sum(delta * a). Throws on a non-physical sign.
double fit_understeer_gradient(const std::vector<SteadyStatePoint>& points);

/// Bounded scalar minimization: coarse grid scan followed by golden
/// section to a relative interval width of `tol`.
double minimize_scalar(const std::function<double(double)>& f, double lo,
                       double hi, int grid_points = 50, double tol = 1e-6);

/// Simulated motor-speed step response from rest (RK4 at dt).
std::vector<double> simulate_motor_step(const MotorParams& p, double va,
                                        std::size_t n_samples, double dt);

/// Simulated lateral-acceleration step response at constant speed,
/// a_y = v * (beta_dot + r), from beta = r = 0.
std::vector<double> simulate_lateral_accel_step(const ChassisParams& cp,
                                                double delta, double v,
                                                std::size_t n_samples,
                                                double dt);

/// Time-constant fit: pick P2 in [lo, hi] minimizing the time-averaged
/// squared transient mismatch with P1 = m_l P2 and P3 = b_l P2 pinned to
/// the fitted steady-state line. Both measured and candidate responses
/// pass through the same zero-phase filter.
double identify_p2(const std::vector<StepExperiment>& experiments, double m_l,
                   double b_l, double lo, double hi,
                   const MotorParams& fixed_geometry, int filter_window = 15);

/// Cornering-stiffness fit: pick Cf in [lo, hi] minimizing the lateral
/// acceleration transient mismatch with Cr eliminated through the
/// understeer constraint. Returns (Cf, Cr).
std::pair<double, double> identify_cf(
    const std::vector<StepExperiment>& experiments, double k_su, double v,
    const ChassisParams& fixed_geometry, double lo, double hi,
    int filter_window = 15);

/// 100 * RMSE(measured - predicted) / range(measured).
double rmse_percent(const std::vector<double>& measured,
                    const std::vector<double>& predicted);

}  // namespace cartwin
