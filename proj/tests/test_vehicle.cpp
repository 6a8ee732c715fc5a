#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "cartwin/rng.hpp"
#include "cartwin/vehicle.hpp"

using namespace cartwin;

namespace {

MotorParams motor(double p1, double p2, double p3, double g = 0.1,
                  double rw = 0.05) {
  MotorParams m;
  m.p1 = p1;
  m.p2 = p2;
  m.p3 = p3;
  m.gear_ratio = g;
  m.wheel_radius = rw;
  return m;
}

/// Steady cornering oracle: solve the 2x2 linear system beta_dot = 0,
/// r_dot = 0 at fixed speed and steering.
Eigen::Vector2d steady_lateral(const ChassisParams& cp, double v,
                               double delta) {
  Eigen::Matrix2d a;
  Eigen::Vector2d rhs;
  a(0, 0) = -(cp.cf + cp.cr);
  a(0, 1) = -(cp.cf * cp.lf / v - cp.cr * cp.lr / v + cp.mass * v);
  a(1, 0) = -(cp.cf * cp.lf - cp.cr * cp.lr);
  a(1, 1) = -(cp.cf * cp.lf * cp.lf + cp.cr * cp.lr * cp.lr) / v;
  rhs << -cp.cf * delta, -cp.cf * cp.lf * delta;
  return a.colPivHouseholderQr().solve(rhs);
}

}  // namespace

TEST_CASE("motor speed derivative") {
  CHECK(motor_speed_derivative(0.0, 1.0, motor(1, 1, 0)) == doctest::Approx(1.0));
  // steady state built from the DC line
  const MotorParams m = motor(62.0, 12.5, 6.25);
  const double va = 1.7;
  const double omega_ss = m.dc_slope() * va - m.dc_offset();
  REQUIRE(omega_ss > 0.0);
  CHECK(motor_speed_derivative(omega_ss, va, m) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(motor_speed_derivative(10.0, 2.0, motor(60, 3, 0.5)) ==
        doctest::Approx(89.5));
  CHECK_THROWS_AS(motor_speed_derivative(std::nan(""), 1.0, m),
                  std::domain_error);
}

TEST_CASE("wheel speed is linear and odd") {
  const MotorParams m = motor(62, 12.5, 6.25, 0.1, 0.05);
  CHECK(wheel_speed(0.0, m) == 0.0);
  CHECK(wheel_speed(100.0, m) == doctest::Approx(200.0));
  CHECK(wheel_speed(-100.0, m) == doctest::Approx(-200.0));
}

TEST_CASE("bicycle derivative equilibrium and alignment") {
  ChassisParams cp;
  MotorParams mp;
  const double va = (0.5 / mp.speed_gain() + mp.dc_offset()) / mp.dc_slope();
  BicycleState s;
  s.v = 0.5;
  const BicycleState d = bicycle_derivative(s, {va, 0.0}, cp, mp);
  CHECK(d.beta == doctest::Approx(0.0));
  CHECK(d.r == doctest::Approx(0.0));
  CHECK(d.psi == doctest::Approx(0.0));
  CHECK(d.v == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d.x == doctest::Approx(0.5));
  CHECK(d.y == doctest::Approx(0.0));
}

TEST_CASE("steady cornering matches the understeer-gradient line") {
  // solve {beta_dot = 0, r_dot = 0}, then check a_ys = v*r against
  // delta / k_su
  ChassisParams cp;
  const double v = 1.5;
  for (double delta : {0.05, 0.1, 0.15}) {
    const Eigen::Vector2d br = steady_lateral(cp, v, delta);
    const double a_ys = v * br(1);
    const double expected = delta / cp.understeer_gradient(v);
    CHECK(a_ys == doctest::Approx(expected).epsilon(1e-3));
  }
}

TEST_CASE("simulated bicycle reaches the steady-cornering solution") {
  ChassisParams cp;
  MotorParams mp;
  const double v = 1.5;
  const double delta = 0.1;
  const double va = (v / mp.speed_gain() + mp.dc_offset()) / mp.dc_slope();
  BicycleState s;
  s.v = v;
  for (int k = 0; k < 500; ++k) {
    s = rk4_step(s, kTick, [&](const BicycleState& b) {
      return bicycle_derivative(b, {va, delta}, cp, mp);
    });
  }
  const Eigen::Vector2d br = steady_lateral(cp, v, delta);
  CHECK(s.beta == doctest::Approx(br(0)).epsilon(1e-6));
  CHECK(s.r == doctest::Approx(br(1)).epsilon(1e-6));
  const double a_ys = v * s.r;
  CHECK(a_ys == doctest::Approx(delta / cp.understeer_gradient(v))
                    .epsilon(1e-3));
}

TEST_CASE("point derivative rotates body accelerations") {
  PointState s;
  s.vx = 1.0;
  s.vy = -2.0;
  SUBCASE("identity rotation") {
    const PointState d = point_derivative(s, 0.7, -0.3, 0.0);
    CHECK(d.x == doctest::Approx(1.0));
    CHECK(d.y == doctest::Approx(-2.0));
    CHECK(d.vx == doctest::Approx(0.7));
    CHECK(d.vy == doctest::Approx(-0.3));
  }
  SUBCASE("quarter turn") {
    const PointState d = point_derivative(s, 1.0, 0.0, M_PI / 2.0);
    CHECK(d.vx == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.vy == doctest::Approx(1.0));
  }
  SUBCASE("45 degrees") {
    const PointState d = point_derivative(s, 1.0, 1.0, M_PI / 4.0);
    CHECK(d.vx == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.vy == doctest::Approx(std::sqrt(2.0)));
  }
}

TEST_CASE("rotation preserves the acceleration norm") {
  RngStream rng(7);
  for (int i = 0; i < 200; ++i) {
    const double ax = rng.uniform(-5, 5), ay = rng.uniform(-5, 5);
    const double psi = rng.uniform(-10, 10);
    const PointState d = point_derivative({}, ax, ay, psi);
    CHECK(std::hypot(d.vx, d.vy) ==
          doctest::Approx(std::hypot(ax, ay)).epsilon(1e-12));
  }
}

TEST_CASE("kinematic sideslip") {
  ChassisParams cp;
  CHECK(kinematic_sideslip(0.0, cp) == 0.0);
  const double expected = std::atan(0.5) * std::tan(0.1);
  CHECK(kinematic_sideslip(0.1, cp) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(kinematic_sideslip(-0.1, cp) ==
        doctest::Approx(-kinematic_sideslip(0.1, cp)));
  CHECK_THROWS_AS(kinematic_sideslip(1.6, cp), std::domain_error);
}

TEST_CASE("rk4 fixed points and order") {
  SUBCASE("zero derivative keeps the state") {
    const BicycleState s{1, 2, 3, 4, 0.1, 0.2};
    const BicycleState out =
        rk4_step(s, 0.01, [](const BicycleState&) { return BicycleState{}; });
    CHECK(out.x == s.x);
    CHECK(out.r == s.r);
  }
  SUBCASE("motor step response against the closed form") {
    const MotorParams m = motor(62.0, 12.5, 6.25);
    const double va = 2.0;
    const double omega_inf = m.dc_slope() * va - m.dc_offset();
    double omega = 0.0;
    // forward motion: starting the step from a hair above zero keeps
    // sgn(omega) = 1 throughout, matching the linear closed form
    const double eps0 = 1e-9;
    omega = eps0;
    for (int k = 0; k < 100; ++k) {
      omega = rk4_step(omega, kTick, [&](double w) {
        return motor_speed_derivative(w, va, m);
      });
    }
    const double expected = omega_inf * (1.0 - std::exp(-m.p2 * 1.0)) +
                            eps0 * std::exp(-m.p2 * 1.0);
    CHECK(std::abs(omega - expected) / expected < 1e-6);
  }
  SUBCASE("halving dt shrinks the global error about 16x") {
    const MotorParams m = motor(10.0, 4.0, 0.0);
    const double va = 1.0;
    const auto simulate = [&](double dt) {
      double w = 1e-12;
      const int n = static_cast<int>(std::lround(0.5 / dt));
      for (int k = 0; k < n; ++k) {
        w = rk4_step(w, dt, [&](double x) {
          return motor_speed_derivative(x, va, m);
        });
      }
      return w;
    };
    const double exact = (m.p1 / m.p2) * va * (1.0 - std::exp(-m.p2 * 0.5));
    const double e1 = std::abs(simulate(0.02) - exact);
    const double e2 = std::abs(simulate(0.01) - exact);
    CHECK(e1 / e2 > 12.0);
    CHECK(e1 / e2 < 20.0);
  }
}

TEST_CASE("straight-line invariance") {
  ChassisParams cp;
  MotorParams mp;
  BicycleState s;
  s.v = 1.0;
  const double va = (1.0 / mp.speed_gain() + mp.dc_offset()) / mp.dc_slope();
  for (int k = 0; k < 200; ++k) {
    s = rk4_step(s, kTick, [&](const BicycleState& b) {
      return bicycle_derivative(b, {va, 0.0}, cp, mp);
    });
  }
  CHECK(s.beta == 0.0);
  CHECK(s.r == 0.0);
  CHECK(s.y == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.x == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("planar speed identity") {
  ChassisParams cp;
  MotorParams mp;
  RngStream rng(3);
  for (int i = 0; i < 100; ++i) {
    BicycleState s;
    s.v = rng.uniform(0.2, 2.0);
    s.psi = rng.uniform(-3, 3);
    s.beta = rng.uniform(-0.3, 0.3);
    s.r = rng.uniform(-1, 1);
    const BicycleState d = bicycle_derivative(s, {1.0, 0.1}, cp, mp);
    CHECK(d.x * d.x + d.y * d.y == doctest::Approx(s.v * s.v).epsilon(1e-12));
  }
}

TEST_CASE("longitudinal dc gain") {
  const MotorParams m = motor(62.0, 12.5, 6.25);
  for (double va : {0.75, 1.5, 2.5}) {
    double omega = 1e-12;
    for (int k = 0; k < 300; ++k) {
      omega = rk4_step(omega, kTick, [&](double w) {
        return motor_speed_derivative(w, va, m);
      });
    }
    const double line = m.dc_slope() * va - m.dc_offset();
    CHECK(std::abs(omega - line) / line < 1e-4);
  }
}

TEST_CASE("lateral rows freeze below the minimum speed") {
  ChassisParams cp;
  MotorParams mp;
  BicycleState s;
  s.v = 0.01;
  s.beta = 0.1;
  s.r = 0.5;
  const BicycleState d = bicycle_derivative(s, {0.0, 0.2}, cp, mp);
  CHECK(d.beta == 0.0);
  CHECK(d.r == 0.0);
  CHECK(d.psi == doctest::Approx(0.5));
}

TEST_CASE("body acceleration matches finite differences of velocity") {
  ChassisParams cp;
  MotorParams mp;
  BicycleState s;
  s.v = 1.2;
  s.psi = 0.4;
  s.beta = 0.05;
  s.r = 0.3;
  const ControlInput u{0.4, 0.1};
  const BicycleState d = bicycle_derivative(s, u, cp, mp);
  const auto [ax, ay] = body_acceleration(s, d);
  // compare with numerical differentiation of the inertial velocity,
  // rotated into the body frame
  const double h = 1e-6;
  const BicycleState s2 = rk4_step(s, h, [&](const BicycleState& b) {
    return bicycle_derivative(b, u, cp, mp);
  });
  const double vx1 = s.v * std::cos(s.beta + s.psi);
  const double vy1 = s.v * std::sin(s.beta + s.psi);
  const double vx2 = s2.v * std::cos(s2.beta + s2.psi);
  const double vy2 = s2.v * std::sin(s2.beta + s2.psi);
  const double ax_in = (vx2 - vx1) / h;
  const double ay_in = (vy2 - vy1) / h;
  const double ax_body = ax_in * std::cos(s.psi) + ay_in * std::sin(s.psi);
  const double ay_body = -ax_in * std::sin(s.psi) + ay_in * std::cos(s.psi);
  CHECK(ax == doctest::Approx(ax_body).epsilon(1e-4));
  CHECK(ay == doctest::Approx(ay_body).epsilon(1e-4));
}
