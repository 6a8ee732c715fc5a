#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cartwin/paths.hpp"
#include "cartwin/vehicle.hpp"

using namespace cartwin;

TEST_CASE("circle path geometry") {
  PathGeometry g;
  g.o_radius = 1.5;
  const Path p = make_o_shape(g);
  CHECK(p.closed());
  CHECK(p.length() == doctest::Approx(2.0 * M_PI * 1.5).epsilon(1e-4));
  for (double s : {0.1, 2.0, 5.0, 9.0}) {
    const PathPoint pt = p.lookup(s);
    CHECK(pt.kappa == doctest::Approx(1.0 / 1.5).epsilon(1e-9));
    CHECK(std::hypot(pt.x, pt.y - 1.5) == doctest::Approx(1.5).epsilon(1e-4));
  }
  SUBCASE("quarter circumference rotates the heading by pi/2") {
    const PathPoint pt = p.lookup(p.length() / 4.0);
    CHECK(pt.psi == doctest::Approx(M_PI / 2.0).epsilon(1e-4));
  }
  SUBCASE("wrap-around lookup") {
    const PathPoint a = p.lookup(0.5);
    const PathPoint b = p.lookup(0.5 + p.length());
    CHECK(a.x == doctest::Approx(b.x).epsilon(1e-12));
    CHECK(a.y == doctest::Approx(b.y).epsilon(1e-12));
  }
}

TEST_CASE("straight segments have zero curvature and constant heading") {
  const Path p = make_s_shape();
  const PathPoint pt = p.lookup(0.5);  // inside the entry straight
  CHECK(pt.kappa == doctest::Approx(0.0));
  CHECK(pt.psi == doctest::Approx(0.0));
  CHECK(pt.y == doctest::Approx(0.0));
  CHECK(pt.x == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("lookup at a knot returns the table row") {
  const Path p = make_oval();
  const auto& row = p.table()[137];
  const PathPoint pt = p.lookup(row.s);
  CHECK(pt.x == doctest::Approx(row.x).epsilon(1e-12));
  CHECK(pt.y == doctest::Approx(row.y).epsilon(1e-12));
  CHECK(pt.psi == doctest::Approx(row.psi).epsilon(1e-12));
}

TEST_CASE("curvature is the arc-length derivative of the heading") {
  for (const char* kind : {"s_shape", "o_shape", "oval", "infinity", "c_shape"}) {
    const Path p = make_path(kind);
    const auto& t = p.table();
    int checked = 0;
    for (std::size_t i = 2; i + 2 < t.size(); i += 7) {
      const double num =
          (t[i + 1].psi - t[i - 1].psi) / (t[i + 1].s - t[i - 1].s);
      // skip joins where curvature is legitimately discontinuous
      if (std::abs(t[i + 1].kappa - t[i - 1].kappa) > 0.05) continue;
      CHECK(num == doctest::Approx(t[i].kappa).epsilon(0.05).scale(1.0));
      ++checked;
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("lemniscate invariants") {
  PathGeometry g;
  g.infinity_half_width = 3.0;
  const Path p = make_infinity(g);
  CHECK(p.closed());
  SUBCASE("total signed curvature over a circuit is zero") {
    const auto& t = p.table();
    double total = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
      total += t[i].kappa * (t[i].s - t[i - 1].s);
    }
    CHECK(std::abs(total) < 1e-2);
  }
  SUBCASE("curvature magnitude matches 3r/a^2") {
    const auto& t = p.table();
    for (std::size_t i = 10; i < t.size() - 10; i += 23) {
      const double r = std::hypot(t[i].x, t[i].y);
      const double expected = 3.0 * r / (3.0 * 3.0);
      CHECK(std::abs(t[i].kappa) ==
            doctest::Approx(expected).epsilon(0.02).scale(0.1));
    }
  }
  SUBCASE("peak curvature sits at the lobe ends") {
    double peak = 0.0;
    for (const auto& row : p.table()) peak = std::max(peak, std::abs(row.kappa));
    CHECK(peak == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("tracking errors") {
  PathPoint ref;
  ref.x = 0.0;
  ref.y = 0.0;
  ref.psi = 0.0;
  ref.kappa = 0.0;
  BicycleState st;
  st.v = 1.0;
  SUBCASE("on path, aligned: all errors vanish") {
    const TrackingErrors e = tracking_errors(st, ref);
    CHECK(e.dy == 0.0);
    CHECK(e.dy_dot == 0.0);
    CHECK(e.dpsi == 0.0);
    CHECK(e.dr == 0.0);
  }
  SUBCASE("offset to the left is positive") {
    st.y = 0.3;
    CHECK(tracking_errors(st, ref).dy == doctest::Approx(0.3));
  }
  SUBCASE("frame rotation") {
    ref.psi = M_PI / 2.0;
    st.x = 1.0;
    st.psi = M_PI / 2.0;
    CHECK(tracking_errors(st, ref).dy == doctest::Approx(-1.0));
  }
  SUBCASE("flipping the path direction flips the sign") {
    st.y = 0.3;
    ref.psi = M_PI;
    st.psi = M_PI;
    CHECK(tracking_errors(st, ref).dy == doctest::Approx(-0.3));
  }
}

TEST_CASE("travelled distance rate") {
  PathPoint ref;
  BicycleState st;
  st.v = 1.0;
  SUBCASE("on path the rate equals the speed") {
    TrackingErrors e;
    CHECK(travelled_distance_rate(st, e, ref) == doctest::Approx(1.0));
  }
  SUBCASE("perpendicular motion gives zero progress") {
    TrackingErrors e;
    e.dpsi = M_PI / 2.0;
    CHECK(travelled_distance_rate(st, e, ref) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("inside of a curve speeds up the coordinate") {
    ref.kappa = 1.0;
    TrackingErrors e;
    e.dy = 0.5;
    CHECK(travelled_distance_rate(st, e, ref) == doctest::Approx(2.0));
  }
  SUBCASE("curvature center is singular") {
    ref.kappa = 1.0;
    TrackingErrors e;
    e.dy = 1.0;
    CHECK_THROWS(travelled_distance_rate(st, e, ref));
  }
}

TEST_CASE("perfect tracking fixed point on every path") {
  // ride each reference exactly: errors stay zero and the integrated
  // arc-length coordinate recovers the full length
  for (const char* kind : {"s_shape", "o_shape", "oval", "infinity", "c_shape"}) {
    const Path p = make_path(kind);
    const double v = 0.5;
    double s_est = 0.0;
    double max_dy = 0.0, max_dpsi = 0.0;
    const int n = static_cast<int>(p.length() / (v * kTick));
    for (int k = 0; k < n; ++k) {
      const double s_true = std::min(v * k * kTick, p.length());
      const PathPoint pose = p.lookup(s_true);
      BicycleState st;
      st.x = pose.x;
      st.y = pose.y;
      st.psi = pose.psi;
      st.v = v;
      st.r = pose.kappa * v;
      const PathPoint ref = p.lookup(s_est);
      const TrackingErrors e = tracking_errors(st, ref);
      max_dy = std::max(max_dy, std::abs(e.dy));
      max_dpsi = std::max(max_dpsi, std::abs(e.dpsi));
      s_est += travelled_distance_rate(st, e, ref) * kTick;
    }
    CHECK(max_dy < 2e-3);
    CHECK(max_dpsi < 2e-2);
    CHECK(s_est == doctest::Approx(v * kTick * (n - 0)).epsilon(1e-3));
    CHECK(s_est / p.length() == doctest::Approx(1.0).epsilon(2e-3));
  }
}

TEST_CASE("lane gates admit the reference with positive margin") {
  const CShape c = make_c_shape();
  double min_margin = std::numeric_limits<double>::infinity();
  int gated = 0;
  for (const auto& row : c.path.table()) {
    const double m = c.gates.margin(row.x, row.y);
    if (std::isfinite(m)) {
      min_margin = std::min(min_margin, m);
      ++gated;
    }
  }
  CHECK(gated > 100);
  CHECK(min_margin > 0.0);
  // entry lane tolerance: (1.1*0.19 + 0.025)/2 - 0.19/2 = 0.022
  CHECK(min_margin == doctest::Approx(0.022).epsilon(0.05));
}

TEST_CASE("gates reject positions outside the lane") {
  const CShape c = make_c_shape();
  // a point in the middle of the entry section, shifted half a metre off
  const double ch = std::cos(c.gates.heading), sh = std::sin(c.gates.heading);
  const double x = c.gates.origin_x + 0.6 * ch - 0.5 * sh;
  const double y = c.gates.origin_y + 0.6 * sh + 0.5 * ch;
  CHECK_FALSE(c.gates.admits(x, y));
  CHECK(c.gates.admits(c.gates.origin_x + 0.6 * ch, c.gates.origin_y + 0.6 * sh));
}

TEST_CASE("csv round trip") {
  const Path p = make_oval();
  const std::string file = "oval_roundtrip_test.csv";
  p.to_csv(file, "reference_path_oval");
  const Path q = Path::from_csv(file, true);
  REQUIRE(q.table().size() == p.table().size());
  const auto a = p.lookup(3.21), b = q.lookup(3.21);
  CHECK(a.x == b.x);
  CHECK(a.psi == b.psi);
  std::remove(file.c_str());
}
