#include "cartwin/vehicle.hpp"

#include <cmath>

namespace cartwin {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void MotorParams::validate() const {
  require(p1 > 0.0 && finite(p1), "motor: p1 must be > 0");
  require(p2 > 0.0 && finite(p2), "motor: p2 must be > 0");
  require(p3 >= 0.0 && finite(p3), "motor: p3 must be >= 0");
  require(gear_ratio > 0.0 && finite(gear_ratio), "motor: gear ratio must be > 0");
  require(wheel_radius > 0.0 && finite(wheel_radius),
          "motor: wheel radius must be > 0");
}

void ChassisParams::validate() const {
  require(mass > 0.0 && finite(mass), "chassis: mass must be > 0");
  require(yaw_inertia > 0.0 && finite(yaw_inertia),
          "chassis: yaw inertia must be > 0");
  require(lf > 0.0 && finite(lf), "chassis: lf must be > 0");
  require(lr > 0.0 && finite(lr), "chassis: lr must be > 0");
  require(cf > 0.0 && finite(cf), "chassis: cf must be > 0");
  require(cr > 0.0 && finite(cr), "chassis: cr must be > 0");
  require(delta_max > 0.0 && finite(delta_max),
          "chassis: delta_max must be > 0");
}

VehicleParams VehicleParams::from_config(const Config& cfg) {
  VehicleParams p;
  p.motor.p1 = cfg.get_double("vehicle.p1", p.motor.p1);
  p.motor.p2 = cfg.get_double("vehicle.p2", p.motor.p2);
  p.motor.p3 = cfg.get_double("vehicle.p3", p.motor.p3);
  p.motor.gear_ratio = cfg.get_double("vehicle.gear_ratio", p.motor.gear_ratio);
  p.motor.wheel_radius =
      cfg.get_double("vehicle.wheel_radius", p.motor.wheel_radius);
  p.chassis.mass = cfg.get_double("vehicle.mass", p.chassis.mass);
  p.chassis.yaw_inertia =
      cfg.get_double("vehicle.yaw_inertia", p.chassis.yaw_inertia);
  p.chassis.lf = cfg.get_double("vehicle.lf", p.chassis.lf);
  p.chassis.lr = cfg.get_double("vehicle.lr", p.chassis.lr);
  p.chassis.cf = cfg.get_double("vehicle.cf", p.chassis.cf);
  p.chassis.cr = cfg.get_double("vehicle.cr", p.chassis.cr);
  p.chassis.delta_max =
      cfg.get_double("vehicle.delta_max", p.chassis.delta_max);
  p.validate();
  return p;
}

double motor_speed_derivative(double omega, double va, const MotorParams& p) {
  if (!finite(omega) || !finite(va)) {
    throw std::domain_error("motor_speed_derivative: non-finite input");
  }
  return p.p1 * va - p.p2 * omega - p.p3 * sgn0(omega);
}

double wheel_speed(double omega, const MotorParams& p) {
  if (!finite(omega)) throw std::domain_error("wheel_speed: non-finite input");
  return p.speed_gain() * omega;
}

double speed_derivative(double v, double va, const MotorParams& p) {
  if (!finite(v) || !finite(va)) {
    throw std::domain_error("speed_derivative: non-finite input");
  }
  const double g = p.speed_gain();
  return g * p.p1 * va - p.p2 * v - g * p.p3 * sgn0(v);
}

BicycleState bicycle_derivative(const BicycleState& s, const ControlInput& u,
                                const ChassisParams& cp,
                                const MotorParams& mp) {
  if (!finite(s.x) || !finite(s.y) || !finite(s.v) || !finite(s.psi) ||
      !finite(s.beta) || !finite(s.r) || !finite(u.va) || !finite(u.delta)) {
    throw std::domain_error("bicycle_derivative: non-finite input");
  }
  BicycleState d;
  d.x = s.v * std::cos(s.beta + s.psi);
  d.y = s.v * std::sin(s.beta + s.psi);
  d.v = speed_derivative(s.v, u.va, mp);
  d.psi = s.r;
  if (s.v <= kMinLateralSpeed) {
    d.beta = 0.0;
    d.r = 0.0;
    return d;
  }
  const double cf = cp.cf, cr = cp.cr, lf = cp.lf, lr = cp.lr;
  const double m = cp.mass, ig = cp.yaw_inertia;
  d.beta = (-(cf + cr + m * d.v) * s.beta -
            (cf * lf / s.v - cr * lr / s.v + m * s.v) * s.r + cf * u.delta) /
           (m * s.v);
  d.r = (-(cf * lf - cr * lr) * s.beta -
         ((cf * lf * lf + cr * lr * lr) / s.v) * s.r + cf * lf * u.delta) /
        ig;
  return d;
}

PointState point_derivative(const PointState& s, double ax_body,
                            double ay_body, double psi) {
  if (!finite(ax_body) || !finite(ay_body) || !finite(psi)) {
    throw std::domain_error("point_derivative: non-finite input");
  }
  PointState d;
  d.x = s.vx;
  d.y = s.vy;
  d.vx = ax_body * std::cos(psi) - ay_body * std::sin(psi);
  d.vy = ax_body * std::sin(psi) + ay_body * std::cos(psi);
  return d;
}

double kinematic_sideslip(double delta, const ChassisParams& cp) {
  if (!(std::abs(delta) < M_PI / 2.0)) {
    throw std::domain_error("kinematic_sideslip: |delta| must be < pi/2");
  }
  return std::atan(cp.cf / (cp.cf + cp.cr)) * std::tan(delta);
}

std::pair<double, double> body_acceleration(const BicycleState& s,
                                            const BicycleState& deriv) {
  const double course_rate = deriv.beta + s.r;
  const double ax =
      deriv.v * std::cos(s.beta) - s.v * course_rate * std::sin(s.beta);
  const double ay =
      deriv.v * std::sin(s.beta) + s.v * course_rate * std::cos(s.beta);
  return {ax, ay};
}

}  // namespace cartwin
