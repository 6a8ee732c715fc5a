#include "cartwin/paths.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cartwin/errors.hpp"
#include "cartwin/io/csv.hpp"

namespace cartwin {

namespace {

constexpr double kSample = 0.01;  // target table spacing, m

/// Accumulates path samples segment by segment. Each segment starts at
/// the builder's current pose and leaves the pose at its endpoint; join
/// rows are not duplicated.
class PathBuilder {
 public:
  PathBuilder(double x0, double y0, double psi0) : x_(x0), y_(y0), psi_(psi0) {
    rows_.push_back({0.0, x_, y_, psi_, 0.0});
  }

  void straight(double length) {
    if (!(length > 0.0)) throw std::invalid_argument("path: straight length");
    const int n = std::max(1, static_cast<int>(std::lround(length / kSample)));
    const double ds = length / n;
    const double c = std::cos(psi_), s = std::sin(psi_);
    for (int i = 1; i <= n; ++i) {
      emit(x_ + ds * i * c, y_ + ds * i * s, psi_, 0.0);
    }
    x_ += length * c;
    y_ += length * s;
  }

  void arc(double radius, double sweep) {
    if (!(radius > 0.0)) throw std::invalid_argument("path: arc radius");
    if (sweep == 0.0) throw std::invalid_argument("path: arc sweep");
    const double length = radius * std::abs(sweep);
    const int n = std::max(2, static_cast<int>(std::lround(length / kSample)));
    const double side = sweep > 0.0 ? 1.0 : -1.0;
    // center sits on the inside of the turn, along the left/right normal
    const double cx = x_ - side * radius * std::sin(psi_);
    const double cy = y_ + side * radius * std::cos(psi_);
    // angle from the center to the start point
    const double phi0 = psi_ - side * M_PI / 2.0;
    const double kappa = side / radius;
    for (int i = 1; i <= n; ++i) {
      const double theta = sweep * i / n;
      const double phi = phi0 + theta;
      emit(cx + radius * std::cos(phi), cy + radius * std::sin(phi),
           psi_ + theta, kappa);
    }
    const double phi_end = phi0 + sweep;
    x_ = cx + radius * std::cos(phi_end);
    y_ = cy + radius * std::sin(phi_end);
    psi_ += sweep;
  }

  /// Cosine lane change: local y goes from 0 to dy over local x in [0, L].
  void lane_change(double length, double dy) {
    if (!(length > 0.0)) throw std::invalid_argument("path: lane length");
    const int n = std::max(2, static_cast<int>(std::lround(
                                  std::hypot(length, dy) / kSample)));
    const double c = std::cos(psi_), s = std::sin(psi_);
    const double x0 = x_, y0 = y_, psi0 = psi_;
    for (int i = 1; i <= n; ++i) {
      const double xl = length * i / n;
      const double arg = M_PI * xl / length;
      const double yl = 0.5 * dy * (1.0 - std::cos(arg));
      const double yp = 0.5 * dy * (M_PI / length) * std::sin(arg);
      const double ypp = 0.5 * dy * (M_PI / length) * (M_PI / length) *
                         std::cos(arg);
      const double kappa = ypp / std::pow(1.0 + yp * yp, 1.5);
      emit(x0 + xl * c - yl * s, y0 + xl * s + yl * c, psi0 + std::atan(yp),
           kappa);
    }
    x_ = x0 + length * c - dy * s;
    y_ = y0 + length * s + dy * c;
    psi_ = psi0;  // profile is flat at both ends
  }

  double x() const { return x_; }
  double y() const { return y_; }
  double psi() const { return psi_; }

  /// Close the loop: append the start pose with psi advanced by the
  /// accumulated winding, then return the table.
  Path finish_closed(double winding_turns) {
    const auto& first = rows_.front();
    const double gap = std::hypot(first.x - x_, first.y - y_);
    std::vector<PathPoint> rows = rows_;
    if (gap > 1e-9) {
      rows.push_back({rows.back().s + gap, first.x, first.y,
                      first.psi + winding_turns * 2.0 * M_PI,
                      rows.back().kappa});
    } else {
      rows.back().x = first.x;
      rows.back().y = first.y;
      rows.back().psi = first.psi + winding_turns * 2.0 * M_PI;
    }
    return Path(std::move(rows), true);
  }

  Path finish_open() { return Path(rows_, false); }

 private:
  void emit(double x, double y, double psi, double kappa) {
    const auto& last = rows_.back();
    const double ds = std::hypot(x - last.x, y - last.y);
    rows_.push_back({last.s + ds, x, y, psi, kappa});
  }

  std::vector<PathPoint> rows_;
  double x_, y_, psi_;
};

}  // namespace

Path::Path(std::vector<PathPoint> table, bool closed)
    : table_(std::move(table)), closed_(closed) {
  if (table_.size() < 2) throw std::invalid_argument("path: too few samples");
  for (std::size_t i = 1; i < table_.size(); ++i) {
    if (!(table_[i].s > table_[i - 1].s)) {
      throw std::invalid_argument("path: s must be strictly increasing");
    }
  }
  length_ = table_.back().s;
  // first row's curvature follows its successor (builder seeds it with 0)
  table_.front().kappa = table_[1].kappa;
}

PathPoint Path::lookup(double s) const {
  if (closed_) {
    s = std::fmod(s, length_);
    if (s < 0.0) s += length_;
  } else {
    s = std::clamp(s, 0.0, length_);
  }
  const auto it = std::upper_bound(
      table_.begin(), table_.end(), s,
      [](double value, const PathPoint& p) { return value < p.s; });
  if (it == table_.begin()) return table_.front();
  if (it == table_.end()) return table_.back();
  const PathPoint& hi = *it;
  const PathPoint& lo = *(it - 1);
  const double a = (s - lo.s) / (hi.s - lo.s);
  PathPoint out;
  out.s = s;
  out.x = lo.x + a * (hi.x - lo.x);
  out.y = lo.y + a * (hi.y - lo.y);
  out.psi = lo.psi + a * (hi.psi - lo.psi);  // unwrapped, shorter arc
  out.kappa = lo.kappa + a * (hi.kappa - lo.kappa);
  return out;
}

void Path::to_csv(const std::string& file, const std::string& schema) const {
  CsvWriter w(file, schema, {"s", "X", "Y", "psi", "kappa"});
  for (const auto& p : table_) w.row({p.s, p.x, p.y, p.psi, p.kappa});
}

Path Path::from_csv(const std::string& file, bool closed) {
  const CsvTable t = read_csv(file);
  std::vector<PathPoint> rows;
  rows.reserve(t.rows.size());
  const int is = t.column_index("s"), ix = t.column_index("X"),
            iy = t.column_index("Y"), ip = t.column_index("psi"),
            ik = t.column_index("kappa");
  if (is < 0 || ix < 0 || iy < 0 || ip < 0 || ik < 0) {
    throw std::invalid_argument("path csv: missing columns");
  }
  for (const auto& r : t.rows) {
    rows.push_back({r[is], r[ix], r[iy], r[ip], r[ik]});
  }
  return Path(std::move(rows), closed);
}

TrackingErrors tracking_errors(const BicycleState& state,
                               const PathPoint& ref) {
  TrackingErrors e;
  const double cr = std::cos(ref.psi), sr = std::sin(ref.psi);
  e.dy = (state.y - ref.y) * cr - (state.x - ref.x) * sr;
  e.dpsi = wrap_angle(state.psi - ref.psi);
  e.dy_dot = state.v * std::sin(e.dpsi + state.beta);
  const double s_dot = travelled_distance_rate(state, e, ref);
  e.dr = state.r - ref.kappa * s_dot;
  return e;
}

double travelled_distance_rate(const BicycleState& state,
                               const TrackingErrors& errors,
                               const PathPoint& ref) {
  const double denom = 1.0 - ref.kappa * errors.dy;
  if (std::abs(denom) < 1e-6) {
    throw NumericalError("travelled_distance_rate: vehicle at curvature center");
  }
  const double vx = state.v * std::cos(state.beta);
  const double vy = state.v * std::sin(state.beta);
  return (vx * std::cos(errors.dpsi) - vy * std::sin(errors.dpsi)) / denom;
}

PathGeometry PathGeometry::from_config(const Config& cfg) {
  PathGeometry g;
  g.s_radius = cfg.get_double("paths.s_radius", g.s_radius);
  g.s_straight = cfg.get_double("paths.s_straight", g.s_straight);
  g.s_arc_deg = cfg.get_double("paths.s_arc_deg", g.s_arc_deg);
  g.o_radius = cfg.get_double("paths.o_radius", g.o_radius);
  g.oval_radius = cfg.get_double("paths.oval_radius", g.oval_radius);
  g.oval_straight = cfg.get_double("paths.oval_straight", g.oval_straight);
  g.infinity_half_width =
      cfg.get_double("paths.infinity_half_width", g.infinity_half_width);
  g.c_entry_straight =
      cfg.get_double("paths.c_entry_straight", g.c_entry_straight);
  g.c_uturn_radius = cfg.get_double("paths.c_uturn_radius", g.c_uturn_radius);
  g.c_link_straight =
      cfg.get_double("paths.c_link_straight", g.c_link_straight);
  g.vehicle_width = cfg.get_double("paths.vehicle_width", g.vehicle_width);
  return g;
}

Path make_s_shape(const PathGeometry& g) {
  const double sweep = g.s_arc_deg * M_PI / 180.0;
  PathBuilder b(0.0, 0.0, 0.0);
  b.straight(g.s_straight);
  b.arc(g.s_radius, sweep);
  b.arc(g.s_radius, -sweep);
  b.straight(g.s_straight);
  return b.finish_open();
}

Path make_o_shape(const PathGeometry& g) {
  PathBuilder b(0.0, 0.0, 0.0);
  b.arc(g.o_radius, 2.0 * M_PI);
  return b.finish_closed(1.0);
}

Path make_oval(const PathGeometry& g) {
  PathBuilder b(0.0, 0.0, 0.0);
  b.straight(g.oval_straight);
  b.arc(g.oval_radius, M_PI);
  b.straight(g.oval_straight);
  b.arc(g.oval_radius, M_PI);
  return b.finish_closed(1.0);
}

Path make_infinity(const PathGeometry& g) {
  const double a = g.infinity_half_width;
  if (!(a > 0.0)) throw std::invalid_argument("path: lemniscate half width");
  // Bernoulli lemniscate, p(t) = a (cos t, sin t cos t) / (1 + sin^2 t).
  std::vector<double> ts, xs, ys, psis;
  double t = 0.0;
  double psi_prev = 0.0;
  const auto point = [a](double tt, double& x, double& y, double& dx,
                         double& dy) {
    const double st = std::sin(tt), ct = std::cos(tt);
    const double u = 1.0 + st * st;
    const double s2t = 2.0 * st * ct, c2t = ct * ct - st * st;
    x = a * ct / u;
    y = a * st * ct / u;
    dx = -a * (st * u + ct * s2t) / (u * u);
    dy = a * (c2t * u - 0.5 * s2t * s2t) / (u * u);
  };
  bool first = true;
  while (t < 2.0 * M_PI) {
    double x, y, dx, dy;
    point(t, x, y, dx, dy);
    const double speed = std::hypot(dx, dy);
    double psi = std::atan2(dy, dx);
    if (first) {
      psi_prev = psi;
      first = false;
    } else {
      psi = psi_prev + wrap_angle(psi - psi_prev);
      psi_prev = psi;
    }
    ts.push_back(t);
    xs.push_back(x);
    ys.push_back(y);
    psis.push_back(psi);
    // midpoint step sized for ~1 cm of arc
    const double h0 = kSample / speed;
    double xm, ym, dxm, dym;
    point(t + 0.5 * h0, xm, ym, dxm, dym);
    t += kSample / std::hypot(dxm, dym);
  }
  const std::size_t n = ts.size();
  std::vector<PathPoint> rows(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) s += std::hypot(xs[i] - xs[i - 1], ys[i] - ys[i - 1]);
    rows[i] = {s, xs[i], ys[i], psis[i], 0.0};
  }
  // signed curvature from the tangent angle, d(psi)/ds
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 < n ? i + 1 : i;
    rows[i].kappa = (rows[hi].psi - rows[lo].psi) / (rows[hi].s - rows[lo].s);
  }
  Path open(std::move(rows), false);
  // re-emit as a closed loop (zero net winding over the figure eight)
  std::vector<PathPoint> closed_rows = open.table();
  const auto& f = closed_rows.front();
  const auto& l = closed_rows.back();
  closed_rows.push_back(
      {l.s + std::hypot(f.x - l.x, f.y - l.y), f.x, f.y, f.psi, f.kappa});
  return Path(std::move(closed_rows), true);
}

bool LaneGates::admits(double x_world, double y_world) const {
  return margin(x_world, y_world) > 0.0;
}

double LaneGates::margin(double x_world, double y_world) const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double dx = x_world - origin_x, dy = y_world - origin_y;
  const double xl = dx * c + dy * s;
  const double yl = -dx * s + dy * c;
  double m = std::numeric_limits<double>::infinity();
  for (const auto& sec : sections) {
    if (xl < sec.x0 || xl > sec.x1) continue;
    m = std::min(m, sec.half_width - vehicle_width / 2.0 -
                        std::abs(yl - sec.y_center));
  }
  return m;
}

CShape make_c_shape(const PathGeometry& g) {
  // Double-lane-change lane widths scaled from the full-size test
  // (vehicle width scaled by 10 for the width formulas).
  const double vw = g.vehicle_width;
  const double w_entry = 1.1 * vw + 0.025;
  const double w_side = vw + 0.1;
  const double w_exit = 1.3 * vw + 0.025;
  const double offset = 0.1 + 0.5 * (w_entry + w_side);
  const double len1 = 1.2, len2 = 1.35, len3 = 2.5, len4 = 1.25, len5 = 1.2;

  PathBuilder b(0.0, 0.0, 0.0);
  b.straight(g.c_entry_straight);
  b.arc(g.c_uturn_radius, M_PI);
  b.straight(g.c_link_straight);

  LaneGates gates;
  gates.origin_x = b.x();
  gates.origin_y = b.y();
  gates.heading = b.psi();
  gates.vehicle_width = vw;
  gates.sections[0] = {0.0, len1, 0.0, w_entry / 2.0};
  gates.sections[1] = {len1 + len2, len1 + len2 + len3, offset, w_side / 2.0};
  gates.sections[2] = {len1 + len2 + len3 + len4,
                       len1 + len2 + len3 + len4 + len5, 0.0, w_exit / 2.0};

  b.straight(len1);
  b.lane_change(len2, offset);
  b.straight(len3);
  b.lane_change(len4, -offset);
  b.straight(len5);
  return {b.finish_open(), gates};
}

Path make_path(const std::string& kind, const PathGeometry& g) {
  if (kind == "s_shape") return make_s_shape(g);
  if (kind == "o_shape") return make_o_shape(g);
  if (kind == "oval") return make_oval(g);
  if (kind == "infinity") return make_infinity(g);
  if (kind == "c_shape") return make_c_shape(g).path;
  throw std::invalid_argument("unknown path kind: " + kind);
}

}  // namespace cartwin
