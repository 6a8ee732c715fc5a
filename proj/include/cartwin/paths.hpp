#pragma once

#include <array>
#include <string>
#include <vector>

#include "cartwin/io/config.hpp"
#include "cartwin/vehicle.hpp"

namespace cartwin {

/// One row of the arc-length-indexed reference table. psi is unwrapped
/// (continuous along s); kappa is the signed curvature d(psi)/ds.
struct PathPoint {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  double kappa = 0.0;
};

/// Immutable reference path sampled at roughly 1 cm of arc length.
/// Closed paths wrap s modulo the total length; open paths clamp.
class Path {
 public:
  Path(std::vector<PathPoint> table, bool closed);

  double length() const { return length_; }
  bool closed() const { return closed_; }
  const std::vector<PathPoint>& table() const { return table_; }

  PathPoint lookup(double s) const;

  void to_csv(const std::string& file, const std::string& schema) const;
  static Path from_csv(const std::string& file, bool closed);

 private:
  std::vector<PathPoint> table_;
  bool closed_;
  double length_;
};

/// Error vector between the vehicle and the reference frame at s:
/// lateral offset, its rate, heading error (wrapped), yaw-rate error.
struct TrackingErrors {
  double dy = 0.0;      // m, positive to the left of the path
  double dy_dot = 0.0;  // m/s
  double dpsi = 0.0;    // rad, in (-pi, pi]
  double dr = 0.0;      // rad/s
};

TrackingErrors tracking_errors(const BicycleState& state, const PathPoint& ref);

/// Rate of progress of the arc-length coordinate:
/// s_dot = (vx cos(dpsi) - vy sin(dpsi)) / (1 - kappa * dy)
/// with (vx, vy) the body-frame velocity components.
double travelled_distance_rate(const BicycleState& state,
                               const TrackingErrors& errors,
                               const PathPoint& ref);

// ---------------------------------------------------------------------------
// Reference geometries

struct PathGeometry {
  double s_radius = 2.0;
  double s_straight = 1.0;
  double s_arc_deg = 90.0;
  double o_radius = 1.5;
  double oval_radius = 1.0;
  double oval_straight = 2.0;
  double infinity_half_width = 3.0;
  double c_entry_straight = 0.5;
  double c_uturn_radius = 1.0;
  double c_link_straight = 1.0;
  double vehicle_width = 0.19;

  static PathGeometry from_config(const Config& cfg);
};

Path make_s_shape(const PathGeometry& g = {});
Path make_o_shape(const PathGeometry& g = {});
Path make_oval(const PathGeometry& g = {});
Path make_infinity(const PathGeometry& g = {});

/// Gated lane sections of the scaled double-lane-change segment,
/// expressed in the segment-local frame (x along entry heading).
struct LaneSection {
  double x0 = 0.0;
  double x1 = 0.0;
  double y_center = 0.0;
  double half_width = 0.0;
};

struct LaneGates {
  std::array<LaneSection, 3> sections;  // entry, side, exit lanes
  double origin_x = 0.0;  // world pose of the segment frame
  double origin_y = 0.0;
  double heading = 0.0;
  double vehicle_width = 0.19;

  /// True if a CoG position is admissible: either outside every gated
  /// x-range or inside the corresponding lane with room for the body.
  bool admits(double x_world, double y_world) const;
  /// The reference path's own clearance must be positive everywhere.
  double margin(double x_world, double y_world) const;
};

struct CShape {
  Path path;
  LaneGates gates;
};

/// U-turn followed by the scaled double-lane-change segment.
CShape make_c_shape(const PathGeometry& g = {});

Path make_path(const std::string& kind, const PathGeometry& g = {});

}  // namespace cartwin
