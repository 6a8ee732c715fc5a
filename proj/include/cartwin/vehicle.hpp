#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "cartwin/io/config.hpp"

namespace cartwin {

/// Controller/simulation tick, 10 ms everywhere.
inline constexpr double kTick = 0.01;

/// Below this speed the lateral bicycle equations (which divide by v)
/// are frozen: beta_dot = r_dot = 0.
inline constexpr double kMinLateralSpeed = 0.05;

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

inline double sgn0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Lumped DC-motor and driveline parameters.
struct MotorParams {
  double p1 = 62.0;          // rad/(s^2 V)
  double p2 = 12.5;          // 1/s
  double p3 = 6.25;          // rad/s^2
  double gear_ratio = 0.1;   // dimensionless
  double wheel_radius = 0.033;  // m

  double dc_slope() const { return p1 / p2; }   // m_l, rad/(s V)
  double dc_offset() const { return p3 / p2; }  // b_l, rad/s
  /// Scale from motor speed to vehicle speed.
  double speed_gain() const { return gear_ratio / wheel_radius; }
  void validate() const;
};

/// Chassis geometry and linear tyre stiffness.
struct ChassisParams {
  double mass = 2.75;         // kg
  double yaw_inertia = 0.033; // kg m^2
  double lf = 0.128;          // m, CoG to front axle
  double lr = 0.128;          // m, CoG to rear axle
  double cf = 25.0;           // N/rad
  double cr = 25.0;           // N/rad
  double delta_max = 0.5236;  // rad, about 30 deg

  double wheelbase() const { return lf + lr; }
  /// Understeer gradient at speed v: steering angle per unit of
  /// steady-state lateral acceleration.
  double understeer_gradient(double v) const {
    return (cf * lf * lf + cr * lr * lr) / (cf * lf * v * v);
  }
  void validate() const;
};

struct VehicleParams {
  MotorParams motor;
  ChassisParams chassis;

  static VehicleParams from_config(const Config& cfg);
  void validate() const {
    motor.validate();
    chassis.validate();
  }
};

/// State of the dynamic bicycle model: inertial position, speed, heading,
/// sideslip, yaw rate.
struct BicycleState {
  double x = 0.0;     // m
  double y = 0.0;     // m
  double v = 0.0;     // m/s
  double psi = 0.0;   // rad (unwrapped)
  double beta = 0.0;  // rad
  double r = 0.0;     // rad/s

  BicycleState operator+(const BicycleState& o) const {
    return {x + o.x, y + o.y, v + o.v, psi + o.psi, beta + o.beta, r + o.r};
  }
  BicycleState operator*(double k) const {
    return {x * k, y * k, v * k, psi * k, beta * k, r * k};
  }
};

/// State of the kinematic point model: inertial position and velocity.
struct PointState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;

  PointState operator+(const PointState& o) const {
    return {x + o.x, y + o.y, vx + o.vx, vy + o.vy};
  }
  PointState operator*(double k) const {
    return {x * k, y * k, vx * k, vy * k};
  }
};

/// Plant inputs: armature voltage and steering angle.
struct ControlInput {
  double va = 0.0;     // V
  double delta = 0.0;  // rad
};

/// Motor speed derivative: p1*va - p2*omega - p3*sgn(omega), sgn(0) = 0.
double motor_speed_derivative(double omega, double va, const MotorParams& p);

/// Vehicle speed from motor speed, v = (G/Rw) * omega.
double wheel_speed(double omega, const MotorParams& p);

/// Speed-channel form of the motor equation:
/// v_dot = (G p1 / Rw) va - p2 v - (G p3 / Rw) sgn(v).
double speed_derivative(double v, double va, const MotorParams& p);

/// Full bicycle-model derivative. Lateral rows freeze below
/// kMinLateralSpeed; the beta equation uses the v_dot computed in the
/// same call for its damping term.
BicycleState bicycle_derivative(const BicycleState& s, const ControlInput& u,
                                const ChassisParams& cp, const MotorParams& mp);

/// Point-model derivative with body accelerations rotated by psi.
PointState point_derivative(const PointState& s, double ax_body,
                            double ay_body, double psi);

/// Kinematic sideslip approximation arctan(cf/(cf+cr)) * tan(delta).
double kinematic_sideslip(double delta, const ChassisParams& cp);

/// Body-frame CoG accelerations consistent with a derivative evaluation.
/// ax = v_dot cos(beta) - v (beta_dot + r) sin(beta)
/// ay = v_dot sin(beta) + v (beta_dot + r) cos(beta)
std::pair<double, double> body_acceleration(const BicycleState& s,
                                            const BicycleState& deriv);

/// Classical fixed-step RK4. `f` maps state to state-derivative; states
/// need operator+ and operator*(double).
template <class State, class Deriv>
State rk4_step(const State& x, double dt, Deriv&& f) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be > 0");
  const State k1 = f(x);
  const State k2 = f(x + k1 * (dt / 2.0));
  const State k3 = f(x + k2 * (dt / 2.0));
  const State k4 = f(x + k3 * dt);
  return x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
}

}  // namespace cartwin
