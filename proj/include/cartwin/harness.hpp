#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cartwin/control.hpp"
#include "cartwin/drl/policy.hpp"
#include "cartwin/io/config.hpp"
#include "cartwin/paths.hpp"
#include "cartwin/vehicle.hpp"

namespace cartwin {

/// Maximum lateral error, its RMS, and the time-averaged absolute
/// steering effort over a manoeuvre of duration t_f.
struct KpiReport {
  double me = 0.0;    // m
  double rmse = 0.0;  // m
  double iaca = 0.0;  // rad
  double t_f = 0.0;   // s
};

/// Integrals are trapezoidal over the uniform 10 ms grid. When t_f is not
/// given it defaults to (n - 1) * dt.
KpiReport compute_kpis(const std::vector<double>& dy,
                       const std::vector<double>& delta, double dt,
                       double t_f = -1.0);

/// 95% chi-square band [lo, hi] for an n-dof consistency statistic.
void chi2_band_95(int dof, double& lo, double& hi);

// ---------------------------------------------------------------------------
// Closed-loop tracking simulation shared by the comparison, the filter
// validation, and the tests.

struct ControllerSpec {
  enum class Kind { FfFb, LqEd, LqCm, Drl };
  Kind kind = Kind::LqEd;
  FfFbParams ff;
  LqWeights lq{Eigen::Vector4d(30.0, 1.0, 20.0, 1.0).asDiagonal(), 20.0};
  std::optional<Policy> policy;

  std::string name() const;
};

struct TrackingTrace {
  std::vector<double> t, s, x, y, psi, v, beta, r, dy, dpsi, delta, va;
  bool finished = false;
  double t_f = 0.0;
  bool gates_pass = true;
  double min_gate_margin = std::numeric_limits<double>::infinity();
  Eigen::RowVector4d lq_gain = Eigen::RowVector4d::Zero();
};

struct TrackingOptions {
  double v_ref = 0.5;
  double delta_dot_max = 1.221730;
  double cap_factor = 3.0;  // step cap relative to the nominal duration
  bool ideal_speed_hold = false;
};

TrackingTrace simulate_tracking(const Path& path, const LaneGates* gates,
                                const ControllerSpec& spec,
                                const VehicleParams& vp,
                                const TrackingOptions& opt);

// ---------------------------------------------------------------------------
// Filter validation run

struct FekfRunMetrics {
  double fused_rmse = 0.0;
  double lidar_rmse = 0.0;
  double max_fused_jump = 0.0;
  double max_lidar_jump = 0.0;
  double beta_ekf_rmse = 0.0;
  double beta_kinematic_rmse = 0.0;
  double nees_bm_in_band = 0.0;  // fraction of ticks
  double nees_pm_in_band = 0.0;
  int spike_count = 0;
  int ticks = 0;
};

/// Oval manoeuvre with the PI speed loop and curvature-compensated LQ
/// steering on ground truth; the sensor stack and both local filters run
/// as observers. When out_dir is non-empty, truth/estimate/fused traces
/// are written there.
FekfRunMetrics simulate_fekf_oval(const Config& cfg, std::uint64_t seed,
                                  const std::string& out_dir);

// ---------------------------------------------------------------------------
// CLI experiment entry points. All outputs land under
// <out_dir>/{traces/*.csv, report.json} and are byte-stable for a fixed
// seed and config.

void run_identification(const Config& cfg, std::uint64_t seed,
                        const std::string& out_dir);
void run_fekf_validation(const Config& cfg, std::uint64_t seed,
                         const std::string& out_dir);
void run_tracking_comparison(const Config& cfg, std::uint64_t seed,
                             const std::string& out_dir,
                             const std::string& policy_file);
void run_training(const Config& cfg, std::uint64_t seed,
                  const std::string& out_dir, bool use_demonstrator);
void run_kpi_tool(const std::string& trace_csv, const std::string& out_dir);
void run_paths_export(const Config& cfg, const std::string& out_dir);

}  // namespace cartwin
