#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cartwin/control.hpp"
#include "cartwin/errors.hpp"
#include "cartwin/rng.hpp"

using namespace cartwin;

namespace {

LqGain default_gain(const ChassisParams& cp, double v) {
  const ErrorStateModel esm = error_state_model(v, cp);
  const Eigen::Matrix4d q = Eigen::Vector4d(30.0, 1.0, 20.0, 1.0).asDiagonal();
  LqGain g = solve_discrete_riccati(esm.ad, esm.bd, q, 20.0);
  g.v_design = v;
  return g;
}

/// Closed-loop steady state on a constant-curvature path; returns the
/// final lateral error.
double circle_steady_dy(bool compensated, double kappa, double v,
                        double seconds = 40.0) {
  ChassisParams cp;
  MotorParams mp;
  PathGeometry geom;
  geom.o_radius = 1.0 / kappa;
  const Path path = make_o_shape(geom);
  const LqGain gain = default_gain(cp, v);
  const double va = (v / mp.speed_gain() + mp.dc_offset()) / mp.dc_slope();

  const PathPoint start = path.lookup(0.0);
  BicycleState st;
  st.x = start.x;
  st.y = start.y;
  st.psi = start.psi;
  st.v = v;
  double s = 0.0, delta = 0.0;
  TrackingErrors xe;
  const int n = static_cast<int>(seconds / kTick);
  for (int k = 0; k < n; ++k) {
    const PathPoint ref = path.lookup(s);
    xe = tracking_errors(st, ref);
    const double cmd = compensated ? lq_cm(xe, gain, ref.kappa, v, cp)
                                   : lq_ed(xe, gain, cp);
    delta = rate_limit_and_saturate(cmd, delta, kTick, 1.22173, cp.delta_max);
    s += travelled_distance_rate(st, xe, ref) * kTick;
    st = rk4_step(st, kTick, [&](const BicycleState& b) {
      return bicycle_derivative(b, {va, delta}, cp, mp);
    });
  }
  return xe.dy;
}

}  // namespace

TEST_CASE("error state model structure") {
  ChassisParams cp;
  const ErrorStateModel esm = error_state_model(0.5, cp);
  CHECK(esm.a(0, 0) == 0.0);
  CHECK(esm.a(0, 1) == 1.0);
  CHECK(esm.a(0, 2) == 0.0);
  CHECK(esm.a(0, 3) == 0.0);
  CHECK(esm.a(2, 0) == 0.0);
  CHECK(esm.a(2, 1) == 0.0);
  CHECK(esm.a(2, 2) == 0.0);
  CHECK(esm.a(2, 3) == 1.0);
  CHECK_THROWS_AS(error_state_model(0.0, cp), std::invalid_argument);
}

TEST_CASE("zoh discretization limits") {
  ChassisParams cp;
  const ErrorStateModel fine = error_state_model(0.5, cp, 1e-6);
  CHECK((fine.ad - Eigen::Matrix4d::Identity()).norm() < 1e-4);
  CHECK(fine.bd.norm() < 1e-4);
  // two half steps must compose to one full step
  const ErrorStateModel full = error_state_model(0.5, cp, kTick);
  const ErrorStateModel half = error_state_model(0.5, cp, kTick / 2.0);
  const Eigen::Matrix4d ad2 = half.ad * half.ad;
  CHECK((ad2 - full.ad).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::Vector4d bd2 = half.ad * half.bd + half.bd;
  CHECK((bd2 - full.bd).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("expm on a nilpotent block matches the series exactly") {
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(3, 3);
  n(0, 1) = 2.0;
  n(1, 2) = -1.0;
  const Eigen::MatrixXd e = expm(n);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(3, 3) + n + 0.5 * n * n;
  CHECK((e - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("discrete riccati scalar fixed point") {
  // oracle: iterate p <- 0.25 p - 0.25 p^2 / (1 + p) + 1 to convergence
  double p_oracle = 1.0;
  for (int i = 0; i < 200; ++i) {
    p_oracle = 0.25 * p_oracle -
               0.25 * p_oracle * p_oracle / (1.0 + p_oracle) + 1.0;
  }
  const double k_oracle = 0.5 * p_oracle / (1.0 + p_oracle);
  CHECK(p_oracle == doctest::Approx(1.1327822).epsilon(1e-6));
  CHECK(k_oracle == doctest::Approx(0.2655644).epsilon(1e-6));

  Eigen::Matrix4d ad = Eigen::Matrix4d::Zero();
  ad(0, 0) = 0.5;
  Eigen::Vector4d bd = Eigen::Vector4d::Zero();
  bd(0) = 1.0;
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(0, 0) = 1.0;
  const LqGain g = solve_discrete_riccati(ad, bd, q, 1.0);
  CHECK(g.k(0) == doctest::Approx(k_oracle).epsilon(1e-8));
  CHECK(g.k.tail<3>().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("riccati residual and stability on the vehicle model") {
  ChassisParams cp;
  const ErrorStateModel esm = error_state_model(0.5, cp);
  const Eigen::Matrix4d q = Eigen::Vector4d(30.0, 1.0, 20.0, 1.0).asDiagonal();
  const double r = 20.0;
  const LqGain g = solve_discrete_riccati(esm.ad, esm.bd, q, r);
  CHECK(closed_loop_radius(esm.ad, esm.bd, g.k) < 1.0);

  Eigen::Matrix4d p = q;
  for (int i = 0; i < 200000; ++i) {
    const Eigen::Vector4d pb = p * esm.bd;
    const double denom = r + esm.bd.dot(pb);
    const Eigen::Matrix4d next =
        esm.ad.transpose() * p * esm.ad -
        (esm.ad.transpose() * pb) * (esm.bd.transpose() * p * esm.ad) / denom +
        q;
    if ((next - p).cwiseAbs().maxCoeff() < 1e-14) {
      p = next;
      break;
    }
    p = next;
  }
  const Eigen::Vector4d pb = p * esm.bd;
  const Eigen::Matrix4d residual =
      esm.ad.transpose() * p * esm.ad -
      (esm.ad.transpose() * pb) * (esm.bd.transpose() * p * esm.ad) /
          (r + esm.bd.dot(pb)) +
      q - p;
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-8);
  const Eigen::RowVector4d k_direct =
      (esm.bd.transpose() * p * esm.ad) / (r + esm.bd.dot(pb));
  CHECK((k_direct - g.k).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero state cost gives zero gain") {
  ChassisParams cp;
  const ErrorStateModel esm = error_state_model(0.5, cp);
  const LqGain g =
      solve_discrete_riccati(esm.ad, esm.bd, Eigen::Matrix4d::Zero(), 5.0);
  CHECK(g.k.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("lq feedback law") {
  ChassisParams cp;
  LqGain g;
  g.k << 2.0, 0.1, 1.5, 0.05;
  TrackingErrors xe;
  SUBCASE("zero error, zero action") { CHECK(lq_ed(xe, g, cp) == 0.0); }
  SUBCASE("dot product") {
    xe.dy = 0.1;
    CHECK(lq_ed(xe, g, cp) == doctest::Approx(-0.2));
  }
  SUBCASE("sign flip") {
    xe.dy = 0.05;
    xe.dpsi = -0.02;
    const double a = lq_ed(xe, g, cp);
    xe.dy = -xe.dy;
    xe.dpsi = -xe.dpsi;
    CHECK(lq_ed(xe, g, cp) == doctest::Approx(-a));
  }
  SUBCASE("saturation") {
    xe.dy = 10.0;
    CHECK(lq_ed(xe, g, cp) == doctest::Approx(-cp.delta_max));
  }
}

TEST_CASE("curvature compensation reduces to pure feedback on straights") {
  ChassisParams cp;
  const LqGain g = default_gain(cp, 0.5);
  RngStream rng(11);
  for (int i = 0; i < 50; ++i) {
    TrackingErrors xe;
    xe.dy = rng.uniform(-0.2, 0.2);
    xe.dy_dot = rng.uniform(-0.5, 0.5);
    xe.dpsi = rng.uniform(-0.4, 0.4);
    xe.dr = rng.uniform(-1.0, 1.0);
    CHECK(lq_cm(xe, g, 0.0, 0.5, cp) == lq_ed(xe, g, cp));
  }
}

TEST_CASE("feedforward is linear in the curvature") {
  ChassisParams cp;
  const LqGain g = default_gain(cp, 0.5);
  TrackingErrors xe;
  const double f1 = lq_cm(xe, g, 0.1, 0.5, cp);
  const double f2 = lq_cm(xe, g, 0.2, 0.5, cp);
  CHECK(f2 == doctest::Approx(2.0 * f1).epsilon(1e-12));
}

TEST_CASE("constant cornering leaves no lateral error with compensation") {
  const double dy = circle_steady_dy(true, 1.0 / 1.5, 0.5);
  CHECK(std::abs(dy) < 1e-3);
}

TEST_CASE("closed loop regulates errors to zero on a straight") {
  ChassisParams cp;
  MotorParams mp;
  const LqGain gain = default_gain(cp, 0.5);
  BicycleState st;
  st.y = 0.1;
  st.psi = 0.1;
  st.v = 0.5;
  const double va = (0.5 / mp.speed_gain() + mp.dc_offset()) / mp.dc_slope();
  PathPoint ref;  // straight along x
  double delta = 0.0;
  for (int k = 0; k < 1500; ++k) {
    ref.x = st.x;  // project directly under the vehicle
    TrackingErrors xe = tracking_errors(st, ref);
    delta = rate_limit_and_saturate(lq_ed(xe, gain, cp), delta, kTick, 1.22173,
                                    cp.delta_max);
    st = rk4_step(st, kTick, [&](const BicycleState& b) {
      return bicycle_derivative(b, {va, delta}, cp, mp);
    });
  }
  CHECK(std::abs(st.y) < 1e-4);
  CHECK(std::abs(wrap_angle(st.psi)) < 1e-3);
}

TEST_CASE("feedforward-feedback strategy") {
  ChassisParams cp;
  FfFbParams p;
  TrackingErrors xe;
  SUBCASE("on path on a straight") { CHECK(ff_fb(xe, 0.0, 0.5, cp, p) == 0.0); }
  SUBCASE("pure heading error isolates the look-ahead term") {
    xe.dpsi = 0.1;
    CHECK(ff_fb(xe, 0.0, 0.5, cp, p) ==
          doctest::Approx(p.k_y * p.look_ahead * 0.1));
  }
  SUBCASE("output respects the steering limit") {
    RngStream rng(5);
    for (int i = 0; i < 1000; ++i) {
      xe.dy = rng.uniform(-5, 5);
      xe.dpsi = rng.uniform(-3, 3);
      const double d = ff_fb(xe, rng.uniform(-2, 2), 0.5, cp, p);
      CHECK(std::abs(d) <= cp.delta_max);
    }
  }
}

TEST_CASE("steering rate limit and saturation") {
  SUBCASE("inside both limits the command passes") {
    CHECK(rate_limit_and_saturate(0.1, 0.09, kTick, 10.0, 0.5236) ==
          doctest::Approx(0.1));
  }
  SUBCASE("slew arithmetic") {
    const double deg = M_PI / 180.0;
    const double out = rate_limit_and_saturate(30.0 * deg, 0.0, kTick,
                                               60.0 * deg, 30.0 * deg);
    CHECK(out == doctest::Approx(0.6 * deg));
  }
  SUBCASE("clamp contract under fuzz") {
    RngStream rng(9);
    double prev = 0.0;
    for (int i = 0; i < 2000; ++i) {
      prev = rate_limit_and_saturate(rng.uniform(-10, 10), prev, kTick,
                                     1.22173, 0.5236);
      CHECK(std::abs(prev) <= 0.5236);
    }
  }
}

TEST_CASE("pi speed loop") {
  PiGains g;
  SUBCASE("zero error keeps zero output") {
    PiSpeedControl pi(g);
    CHECK(pi.update(0.5, 0.5, kTick) == doctest::Approx(0.0));
  }
  SUBCASE("step response settles within three seconds") {
    MotorParams mp;
    PiSpeedControl pi(g);
    double v = 0.0;
    double t_settle = -1.0;
    for (int k = 0; k < 600; ++k) {
      const double va = pi.update(0.5, v, kTick);
      v = rk4_step(v, kTick,
                   [&](double x) { return speed_derivative(x, va, mp); });
      if (t_settle < 0.0 && std::abs(v - 0.5) < 0.01) t_settle = k * kTick;
      if (t_settle > 0.0 && std::abs(v - 0.5) >= 0.01) t_settle = -1.0;
    }
    CHECK(std::abs(v - 0.5) < 0.01);
    CHECK(t_settle < 3.0);
    CHECK(t_settle >= 0.0);
  }
  SUBCASE("integrator freezes while saturated") {
    PiSpeedControl pi(g);
    const double before = pi.integrator();
    for (int k = 0; k < 100; ++k) pi.update(1000.0, 0.0, kTick);
    const double frozen = pi.integrator();
    for (int k = 0; k < 100; ++k) pi.update(1000.0, 0.0, kTick);
    CHECK(pi.integrator() == doctest::Approx(frozen));
    CHECK(frozen >= before);
  }
}

TEST_CASE("gain scheduling recomputes away from the design speed") {
  ChassisParams cp;
  const Eigen::Matrix4d q = Eigen::Vector4d(30.0, 1.0, 20.0, 1.0).asDiagonal();
  LqSteering steer(cp, q, 20.0, 0.5, LqSteering::Mode::Feedback);
  const Eigen::RowVector4d k0 = steer.gain().k;
  TrackingErrors xe;
  xe.dy = 0.01;
  steer.update(xe, 0.0, 0.52);  // inside the dead band
  CHECK((steer.gain().k - k0).cwiseAbs().maxCoeff() == 0.0);
  steer.update(xe, 0.0, 1.0);  // forces a redesign
  CHECK(steer.gain().v_design == doctest::Approx(1.0));
  CHECK((steer.gain().k - k0).cwiseAbs().maxCoeff() > 1e-6);
}
