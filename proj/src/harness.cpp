#include "cartwin/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cartwin/drl/ddpg.hpp"
#include "cartwin/errors.hpp"
#include "cartwin/fekf.hpp"
#include "cartwin/identification.hpp"
#include "cartwin/io/csv.hpp"
#include "cartwin/sensors.hpp"

namespace cartwin {

namespace fs = std::filesystem;
using nlohmann::json;

KpiReport compute_kpis(const std::vector<double>& dy,
                       const std::vector<double>& delta, double dt,
                       double t_f) {
  if (dy.empty() || dy.size() != delta.size()) {
    throw std::invalid_argument("compute_kpis: empty or mismatched series");
  }
  if (dy.size() < 2) throw std::invalid_argument("compute_kpis: need >= 2 samples");
  if (t_f <= 0.0) t_f = (dy.size() - 1) * dt;
  KpiReport k;
  k.t_f = t_f;
  double sq = 0.0, abs_delta = 0.0;
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const double w = (i == 0 || i + 1 == dy.size()) ? 0.5 : 1.0;  // trapezoid
    k.me = std::max(k.me, std::abs(dy[i]));
    sq += w * dy[i] * dy[i] * dt;
    abs_delta += w * std::abs(delta[i]) * dt;
  }
  k.rmse = std::sqrt(sq / t_f);
  k.iaca = abs_delta / t_f;
  return k;
}

void chi2_band_95(int dof, double& lo, double& hi) {
  // two-sided 95% quantiles of the chi-square distribution
  static const double table[10][2] = {
      {0.000982069, 5.023886}, {0.0506356, 7.377759}, {0.2157953, 9.348404},
      {0.4844186, 11.143287},  {0.8312116, 12.832502}, {1.2373442, 14.449375},
      {1.6898692, 16.012764},  {2.1797307, 17.534546}, {2.7003895, 19.022768},
      {3.2469727, 20.483177}};
  if (dof < 1 || dof > 10) {
    throw std::invalid_argument("chi2_band_95: dof out of table range");
  }
  lo = table[dof - 1][0];
  hi = table[dof - 1][1];
}

std::string ControllerSpec::name() const {
  switch (kind) {
    case Kind::FfFb: return "ff_fb";
    case Kind::LqEd: return "lq_ed";
    case Kind::LqCm: return "lq_cm";
    case Kind::Drl: return "drl";
  }
  return "unknown";
}

TrackingTrace simulate_tracking(const Path& path, const LaneGates* gates,
                                const ControllerSpec& spec,
                                const VehicleParams& vp,
                                const TrackingOptions& opt) {
  TrackingTrace log;
  const PathPoint start = path.lookup(0.0);
  BicycleState st;
  st.x = start.x;
  st.y = start.y;
  st.psi = start.psi;
  st.v = opt.v_ref;
  double s = 0.0;
  double delta = 0.0;

  const MotorParams& m = vp.motor;
  const double steady_va =
      (opt.v_ref / m.speed_gain() + m.dc_offset()) / m.dc_slope();
  PiGains pig;
  PiSpeedControl pi(pig);
  pi.reset(pig.ki > 0.0 ? steady_va / pig.ki : 0.0);

  std::optional<LqSteering> lq;
  if (spec.kind == ControllerSpec::Kind::LqEd) {
    lq.emplace(vp.chassis, spec.lq.q, spec.lq.r, opt.v_ref,
               LqSteering::Mode::Feedback);
  } else if (spec.kind == ControllerSpec::Kind::LqCm) {
    lq.emplace(vp.chassis, spec.lq.q, spec.lq.r, opt.v_ref,
               LqSteering::Mode::CurvatureCompensated);
  } else if (spec.kind == ControllerSpec::Kind::Drl && !spec.policy) {
    throw std::invalid_argument("simulate_tracking: drl spec without policy");
  }

  const int cap = static_cast<int>(
      std::ceil(path.length() / (opt.v_ref * kTick) * opt.cap_factor));
  for (int k = 0; k < cap; ++k) {
    const PathPoint ref = path.lookup(s);
    const TrackingErrors xe = tracking_errors(st, ref);

    double cmd = 0.0;
    switch (spec.kind) {
      case ControllerSpec::Kind::FfFb:
        cmd = ff_fb(xe, ref.kappa, st.v, vp.chassis, spec.ff);
        delta = rate_limit_and_saturate(cmd, delta, kTick, opt.delta_dot_max,
                                        vp.chassis.delta_max);
        break;
      case ControllerSpec::Kind::LqEd:
      case ControllerSpec::Kind::LqCm:
        cmd = lq->update(xe, ref.kappa, st.v);
        delta = rate_limit_and_saturate(cmd, delta, kTick, opt.delta_dot_max,
                                        vp.chassis.delta_max);
        break;
      case ControllerSpec::Kind::Drl: {
        const Eigen::Vector4d raw(xe.dy, xe.dy_dot, xe.dpsi, xe.dr);
        double rate = spec.policy->act(raw);
        rate = std::clamp(rate, -opt.delta_dot_max, opt.delta_dot_max);
        delta = std::clamp(delta + rate * kTick, -vp.chassis.delta_max,
                           vp.chassis.delta_max);
        break;
      }
    }
    const double va =
        opt.ideal_speed_hold ? steady_va : pi.update(opt.v_ref, st.v, kTick);

    log.t.push_back(k * kTick);
    log.s.push_back(s);
    log.x.push_back(st.x);
    log.y.push_back(st.y);
    log.psi.push_back(st.psi);
    log.v.push_back(st.v);
    log.beta.push_back(st.beta);
    log.r.push_back(st.r);
    log.dy.push_back(xe.dy);
    log.dpsi.push_back(xe.dpsi);
    log.delta.push_back(delta);
    log.va.push_back(va);
    if (gates) {
      const double margin = gates->margin(st.x, st.y);
      if (std::isfinite(margin)) {
        log.min_gate_margin = std::min(log.min_gate_margin, margin);
        if (margin <= 0.0) log.gates_pass = false;
      }
    }

    const double s_dot = travelled_distance_rate(st, xe, ref);
    s += s_dot * kTick;
    const ControlInput u{va, delta};
    st = rk4_step(st, kTick, [&](const BicycleState& b) {
      return bicycle_derivative(b, u, vp.chassis, vp.motor);
    });
    if (s >= path.length()) {
      log.finished = true;
      break;
    }
  }
  log.t_f = log.t.size() * kTick;
  if (lq) log.lq_gain = lq->gain().k;
  return log;
}

// ---------------------------------------------------------------------------

FekfRunMetrics simulate_fekf_oval(const Config& cfg, std::uint64_t seed,
                                  const std::string& out_dir) {
  const VehicleParams vp = VehicleParams::from_config(cfg);
  const SensorConfig sc = SensorConfig::from_config(cfg);
  const FekfConfig fc = FekfConfig::from_config(cfg);
  const PathGeometry geom = PathGeometry::from_config(cfg);
  const LqWeights lw = LqWeights::from_config(cfg);
  const double v_ref = cfg.get_double("run.v_ref", 0.5);
  const double duration = cfg.get_double("fekf.duration", 60.0);
  const double delta_dot_max =
      cfg.get_double("control.delta_dot_max", 1.221730);

  const Path path = make_oval(geom);
  RngStream root(seed);
  RngStream init_rng = root.spawn();
  SensorSimulator sensors(sc, vp.motor, root.spawn().next_u64());

  const PathPoint start = path.lookup(0.0);
  BicycleState st;
  st.x = start.x;
  st.y = start.y;
  st.psi = start.psi;
  st.v = v_ref;
  double s = 0.0;
  double delta = 0.0;

  PiGains pig;
  PiSpeedControl pi(pig);
  const double steady_va =
      (v_ref / vp.motor.speed_gain() + vp.motor.dc_offset()) /
      vp.motor.dc_slope();
  pi.reset(pig.ki > 0.0 ? steady_va / pig.ki : 0.0);
  LqSteering steer(vp.chassis, lw.q, lw.r, v_ref,
                   LqSteering::Mode::CurvatureCompensated);

  // initial estimates drawn from the stated initial covariance
  Eigen::VectorXd x0_bm(6);
  x0_bm << st.x, st.y, st.v, st.psi, st.beta, st.r;
  Eigen::VectorXd p0_bm(6);
  p0_bm << fc.p0_pos, fc.p0_pos, fc.p0_vel, fc.p0_angle, fc.p0_angle,
      fc.p0_angle;
  for (int i = 0; i < 6; ++i) {
    x0_bm(i) += init_rng.gaussian(0.0, std::sqrt(p0_bm(i)));
  }
  Eigen::VectorXd x0_pm(4);
  x0_pm << st.x, st.y, st.v * std::cos(st.beta + st.psi),
      st.v * std::sin(st.beta + st.psi);
  Eigen::VectorXd p0_pm(4);
  p0_pm << fc.p0_pos, fc.p0_pos, fc.p0_vel, fc.p0_vel;
  for (int i = 0; i < 4; ++i) {
    x0_pm(i) += init_rng.gaussian(0.0, std::sqrt(p0_pm(i)));
  }
  BmFilter bm(vp, sc, fc, x0_bm);
  PmFilter pm(sc, fc, x0_pm, st.psi);

  const int n_ticks = static_cast<int>(std::lround(duration / kTick));
  double lo6, hi6, lo4, hi4;
  chi2_band_95(6, lo6, hi6);
  chi2_band_95(4, lo4, hi4);

  FekfRunMetrics out;
  double fused_sq = 0.0, lidar_sq = 0.0;
  int lidar_count = 0, bm_in = 0, pm_in = 0;
  bool have_prev_fused = false, have_prev_lidar = false;
  Eigen::Vector2d prev_fused, prev_lidar;
  double beta_ekf_sq = 0.0, beta_kin_sq = 0.0;

  std::optional<CsvWriter> w_truth, w_bm, w_pm, w_fused, w_frames;
  if (!out_dir.empty()) {
    fs::create_directories(fs::path(out_dir));
    w_truth.emplace(out_dir + "/truth.csv", "fekf_truth",
                    std::vector<std::string>{"t", "X", "Y", "v", "psi", "beta",
                                             "r", "delta", "va"});
    w_bm.emplace(out_dir + "/ekf_bm.csv", "fekf_local_bm",
                 std::vector<std::string>{"t", "X", "Y", "v", "psi", "beta",
                                          "r", "pxx", "pyy", "pvv", "ppsipsi",
                                          "pbetabeta", "prr", "nees"});
    w_pm.emplace(out_dir + "/ekf_pm.csv", "fekf_local_pm",
                 std::vector<std::string>{"t", "X", "Y", "Vx", "Vy", "pxx",
                                          "pyy", "pvxvx", "pvyvy", "nees"});
    w_fused.emplace(out_dir + "/fused.csv", "fekf_fused_position",
                    std::vector<std::string>{"t", "X", "Y", "pxx", "pxy",
                                             "pyy", "source"});
    w_frames.emplace(
        out_dir + "/frames.csv", "fekf_sensor_frames",
        std::vector<std::string>{"t", "ax", "ay", "gyro_r", "encoder_omega",
                                 "lidar_x", "lidar_y", "lidar_psi",
                                 "lidar_score"});
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < n_ticks; ++k) {
    const PathPoint ref = path.lookup(s);
    const TrackingErrors xe = tracking_errors(st, ref);
    const double cmd = steer.update(xe, ref.kappa, st.v);
    delta = rate_limit_and_saturate(cmd, delta, kTick, delta_dot_max,
                                    vp.chassis.delta_max);
    const double va = pi.update(v_ref, st.v, kTick);
    const ControlInput u{va, delta};

    const BicycleState deriv = bicycle_derivative(st, u, vp.chassis, vp.motor);
    const auto [ax, ay] = body_acceleration(st, deriv);
    const SensorFrame frame = sensors.sample(st, ax, ay, k);

    bm.step(frame, u);
    pm.step(frame, bm.estimate().x(3));
    const FusedPosition fused = master_fuse(bm.estimate(), pm.estimate());

    // metrics
    const Eigen::Vector2d truth_pos(st.x, st.y);
    const Eigen::Vector2d err_f = fused.p - truth_pos;
    fused_sq += err_f.squaredNorm();
    if (have_prev_fused) {
      out.max_fused_jump =
          std::max(out.max_fused_jump, (fused.p - prev_fused).norm());
    }
    prev_fused = fused.p;
    have_prev_fused = true;

    if (frame.lidar) {
      const Eigen::Vector2d lp(frame.lidar->x, frame.lidar->y);
      lidar_sq += (lp - truth_pos).squaredNorm();
      ++lidar_count;
      if (frame.lidar->spiked) ++out.spike_count;
      if (have_prev_lidar) {
        out.max_lidar_jump =
            std::max(out.max_lidar_jump, (lp - prev_lidar).norm());
      }
      prev_lidar = lp;
      have_prev_lidar = true;
    }

    Eigen::VectorXd truth_bm(6);
    truth_bm << st.x, st.y, st.v, st.psi, st.beta, st.r;
    const double nees_bm = nees(bm.estimate(), truth_bm, {3});
    if (nees_bm >= lo6 && nees_bm <= hi6) ++bm_in;
    Eigen::VectorXd truth_pm(4);
    truth_pm << st.x, st.y, st.v * std::cos(st.beta + st.psi),
        st.v * std::sin(st.beta + st.psi);
    const double nees_pm = nees(pm.estimate(), truth_pm, {});
    if (nees_pm >= lo4 && nees_pm <= hi4) ++pm_in;

    const double beta_hat = bm.estimate().x(4);
    const double beta_kin = kinematic_sideslip(delta, vp.chassis);
    beta_ekf_sq += (beta_hat - st.beta) * (beta_hat - st.beta);
    beta_kin_sq += (beta_kin - st.beta) * (beta_kin - st.beta);

    if (w_truth) {
      const double t = k * kTick;
      w_truth->row({t, st.x, st.y, st.v, st.psi, st.beta, st.r, delta, va});
      const auto& be = bm.estimate();
      w_bm->row({t, be.x(0), be.x(1), be.x(2), be.x(3), be.x(4), be.x(5),
                 be.p(0, 0), be.p(1, 1), be.p(2, 2), be.p(3, 3), be.p(4, 4),
                 be.p(5, 5), nees_bm});
      const auto& pe = pm.estimate();
      w_pm->row({t, pe.x(0), pe.x(1), pe.x(2), pe.x(3), pe.p(0, 0),
                 pe.p(1, 1), pe.p(2, 2), pe.p(3, 3), nees_pm});
      w_fused->row({t, fused.p(0), fused.p(1), fused.cov(0, 0),
                    fused.cov(0, 1), fused.cov(1, 1),
                    static_cast<double>(fused.used)});
      if (frame.lidar) {
        w_frames->row({t, frame.ax, frame.ay, frame.gyro_r,
                       frame.encoder_omega, frame.lidar->x, frame.lidar->y,
                       frame.lidar->psi, frame.lidar->score});
      } else {
        w_frames->row({t, frame.ax, frame.ay, frame.gyro_r,
                       frame.encoder_omega, nan, nan, nan, nan});
      }
    }

    const double s_dot = travelled_distance_rate(st, xe, ref);
    s += s_dot * kTick;
    st = rk4_step(st, kTick, [&](const BicycleState& b) {
      return bicycle_derivative(b, u, vp.chassis, vp.motor);
    });
  }

  out.ticks = n_ticks;
  out.fused_rmse = std::sqrt(fused_sq / n_ticks);
  out.lidar_rmse = lidar_count ? std::sqrt(lidar_sq / lidar_count) : 0.0;
  out.nees_bm_in_band = static_cast<double>(bm_in) / n_ticks;
  out.nees_pm_in_band = static_cast<double>(pm_in) / n_ticks;
  out.beta_ekf_rmse = std::sqrt(beta_ekf_sq / n_ticks);
  out.beta_kinematic_rmse = std::sqrt(beta_kin_sq / n_ticks);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

std::vector<double> add_noise(const std::vector<double>& clean, double std,
                              RngStream& rng) {
  std::vector<double> out = clean;
  if (std > 0.0) {
    for (double& v : out) v += rng.gaussian(0.0, std);
  }
  return out;
}

double tail_mean(const std::vector<double>& v, double fraction = 0.1) {
  const std::size_t n = v.size();
  const std::size_t k = std::max<std::size_t>(1, n * fraction);
  double acc = 0.0;
  for (std::size_t i = n - k; i < n; ++i) acc += v[i];
  return acc / k;
}

struct IdentOutcome {
  LongitudinalFit longitudinal;
  LateralFit lateral;
  double rmse_long_id = 0.0, rmse_long_valid = 0.0;
  double rmse_lat_id = 0.0, rmse_lat_valid = 0.0;
};

IdentOutcome run_identification_once(const Config& cfg, std::uint64_t seed,
                                     const std::string& traces_dir) {
  const VehicleParams vp = VehicleParams::from_config(cfg);
  RngStream rng(seed);

  const double dt = kTick;
  const int n_long = static_cast<int>(
      std::lround(cfg.get_double("ident.duration_long", 2.0) / dt)) + 1;
  const int n_lat = static_cast<int>(
      std::lround(cfg.get_double("ident.duration_lat", 1.5) / dt)) + 1;
  const double noise_omega = cfg.get_double("ident.omega_noise_std", 0.5);
  const double noise_ay = cfg.get_double("ident.ay_noise_std", 0.05);
  const int window = cfg.get_int("ident.filter_window", 15);
  const double v_lat = cfg.get_double("ident.lateral_speed", 1.5);

  const std::vector<double> va_id =
      cfg.get_doubles("ident.va_id", {0.75, 1.25, 1.5, 2.0, 2.5});
  const std::vector<double> va_valid =
      cfg.get_doubles("ident.va_valid", {1.1, 1.35, 1.85, 2.25});
  const std::vector<double> delta_id_deg =
      cfg.get_doubles("ident.delta_id_deg", {4.0, 7.0, 9.0, 11.0, 14.0});
  const std::vector<double> delta_valid_deg =
      cfg.get_doubles("ident.delta_valid_deg", {5.5, 8.5, 10.5, 12.5, 13.5});

  // --- longitudinal stage -------------------------------------------------
  std::vector<StepExperiment> long_exps;
  std::vector<SteadyStatePoint> omega_points;
  for (double va : va_id) {
    StepExperiment e;
    e.input_level = va;
    e.kind = ExperimentKind::Longitudinal;
    e.samples = add_noise(simulate_motor_step(vp.motor, va, n_long, dt),
                          noise_omega, rng);
    const std::vector<double> filtered = moving_average(e.samples, window);
    omega_points.push_back({va, tail_mean(filtered)});
    long_exps.push_back(std::move(e));
  }
  const auto [m_l, b_l] = fit_steady_state_line(omega_points);
  const double p2_lo = cfg.get_double("ident.p2_lo", 2.0);
  const double p2_hi = cfg.get_double("ident.p2_hi", 50.0);
  IdentOutcome out;
  out.longitudinal.m_l = m_l;
  out.longitudinal.b_l = b_l;
  out.longitudinal.p2 =
      identify_p2(long_exps, m_l, b_l, p2_lo, p2_hi, vp.motor, window);
  out.longitudinal.p1 = m_l * out.longitudinal.p2;
  out.longitudinal.p3 = b_l * out.longitudinal.p2;

  MotorParams fitted_motor = vp.motor;
  fitted_motor.p1 = out.longitudinal.p1;
  fitted_motor.p2 = out.longitudinal.p2;
  fitted_motor.p3 = out.longitudinal.p3;

  const auto long_rmse = [&](const std::vector<double>& vas,
                             std::vector<StepExperiment>* keep) {
    double acc = 0.0;
    for (double va : vas) {
      StepExperiment e;
      e.input_level = va;
      e.kind = ExperimentKind::Longitudinal;
      e.samples = add_noise(simulate_motor_step(vp.motor, va, n_long, dt),
                            noise_omega, rng);
      const std::vector<double> pred =
          simulate_motor_step(fitted_motor, va, n_long, dt);
      acc += rmse_percent(moving_average(e.samples, window), pred);
      if (keep) keep->push_back(std::move(e));
    }
    return acc / vas.size();
  };
  out.rmse_long_id = long_rmse(va_id, nullptr);
  std::vector<StepExperiment> long_valid;
  out.rmse_long_valid = long_rmse(va_valid, &long_valid);

  // --- lateral stage ------------------------------------------------------
  std::vector<StepExperiment> lat_exps;
  std::vector<SteadyStatePoint> ay_points;
  for (double ddeg : delta_id_deg) {
    StepExperiment e;
    e.input_level = ddeg * M_PI / 180.0;
    e.kind = ExperimentKind::Lateral;
    e.samples = add_noise(
        simulate_lateral_accel_step(vp.chassis, e.input_level, v_lat, n_lat,
                                    dt),
        noise_ay, rng);
    const std::vector<double> filtered = moving_average(e.samples, window);
    ay_points.push_back({e.input_level, tail_mean(filtered)});
    lat_exps.push_back(std::move(e));
  }
  out.lateral.k_su = fit_understeer_gradient(ay_points);
  const double cf_lo = cfg.get_double("ident.cf_lo", 5.0);
  const double cf_hi = cfg.get_double("ident.cf_hi", 100.0);
  const auto [cf, cr] = identify_cf(lat_exps, out.lateral.k_su, v_lat,
                                    vp.chassis, cf_lo, cf_hi, window);
  out.lateral.cf = cf;
  out.lateral.cr = cr;

  ChassisParams fitted_chassis = vp.chassis;
  fitted_chassis.cf = cf;
  fitted_chassis.cr = cr;
  const auto lat_rmse = [&](const std::vector<double>& deltas_deg) {
    double acc = 0.0;
    for (double ddeg : deltas_deg) {
      const double d = ddeg * M_PI / 180.0;
      const std::vector<double> meas = add_noise(
          simulate_lateral_accel_step(vp.chassis, d, v_lat, n_lat, dt),
          noise_ay, rng);
      const std::vector<double> pred =
          simulate_lateral_accel_step(fitted_chassis, d, v_lat, n_lat, dt);
      acc += rmse_percent(moving_average(meas, window), pred);
    }
    return acc / deltas_deg.size();
  };
  out.rmse_lat_id = lat_rmse(delta_id_deg);
  out.rmse_lat_valid = lat_rmse(delta_valid_deg);

  if (!traces_dir.empty()) {
    fs::create_directories(fs::path(traces_dir));
    {
      CsvWriter w(traces_dir + "/steady_state_long.csv",
                  "steady_state_motor_speed", {"va", "omega_s", "line"});
      for (const auto& p : omega_points) {
        w.row({p.input, p.output, m_l * p.input - b_l});
      }
    }
    {
      CsvWriter w(traces_dir + "/steady_state_lat.csv",
                  "steady_state_lateral_acceleration",
                  {"delta", "a_ys", "line"});
      for (const auto& p : ay_points) {
        w.row({p.input, p.output, p.input / out.lateral.k_su});
      }
    }
    {
      CsvWriter w(traces_dir + "/long_transients.csv",
                  "motor_speed_step_responses",
                  {"experiment", "t", "measured", "predicted"});
      for (std::size_t j = 0; j < long_exps.size(); ++j) {
        const auto pred = simulate_motor_step(
            fitted_motor, long_exps[j].input_level, n_long, dt);
        for (int i = 0; i < n_long; ++i) {
          w.row({static_cast<double>(j), i * dt, long_exps[j].samples[i],
                 pred[i]});
        }
      }
    }
    {
      CsvWriter w(traces_dir + "/lat_transients.csv",
                  "lateral_acceleration_step_responses",
                  {"experiment", "t", "measured", "predicted"});
      for (std::size_t j = 0; j < lat_exps.size(); ++j) {
        const auto pred = simulate_lateral_accel_step(
            fitted_chassis, lat_exps[j].input_level, v_lat, n_lat, dt);
        for (int i = 0; i < n_lat; ++i) {
          w.row({static_cast<double>(j), i * dt, lat_exps[j].samples[i],
                 pred[i]});
        }
      }
    }
  }
  return out;
}

}  // namespace

void run_identification(const Config& cfg, std::uint64_t seed,
                        const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "traces");
  const VehicleParams vp = VehicleParams::from_config(cfg);
  const IdentOutcome r =
      run_identification_once(cfg, seed, out_dir + "/traces");

  const auto pct = [](double est, double truth) {
    return 100.0 * std::abs(est - truth) / std::abs(truth);
  };
  json j;
  j["seed"] = seed;
  j["longitudinal"] = {
      {"m_l", r.longitudinal.m_l},
      {"b_l", r.longitudinal.b_l},
      {"p1", r.longitudinal.p1},
      {"p2", r.longitudinal.p2},
      {"p3", r.longitudinal.p3},
      {"truth", {{"p1", vp.motor.p1}, {"p2", vp.motor.p2}, {"p3", vp.motor.p3}}},
      {"error_pct",
       {{"p1", pct(r.longitudinal.p1, vp.motor.p1)},
        {"p2", pct(r.longitudinal.p2, vp.motor.p2)},
        {"p3", pct(r.longitudinal.p3, vp.motor.p3)}}},
      {"rmse_pct_identification", r.rmse_long_id},
      {"rmse_pct_validation", r.rmse_long_valid}};
  j["lateral"] = {
      {"k_su", r.lateral.k_su},
      {"cf", r.lateral.cf},
      {"cr", r.lateral.cr},
      {"truth", {{"cf", vp.chassis.cf}, {"cr", vp.chassis.cr}}},
      {"error_pct",
       {{"cf", pct(r.lateral.cf, vp.chassis.cf)},
        {"cr", pct(r.lateral.cr, vp.chassis.cr)}}},
      {"rmse_pct_identification", r.rmse_lat_id},
      {"rmse_pct_validation", r.rmse_lat_valid}};
  write_json(j, out_dir + "/report.json");
}

void run_fekf_validation(const Config& cfg, std::uint64_t seed,
                         const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "traces");
  const FekfRunMetrics m = simulate_fekf_oval(cfg, seed, out_dir + "/traces");
  json j;
  j["seed"] = seed;
  j["ticks"] = m.ticks;
  j["fused_position_rmse"] = m.fused_rmse;
  j["lidar_position_rmse"] = m.lidar_rmse;
  j["max_fused_jump"] = m.max_fused_jump;
  j["max_lidar_jump"] = m.max_lidar_jump;
  j["sideslip_rmse_ekf"] = m.beta_ekf_rmse;
  j["sideslip_rmse_kinematic"] = m.beta_kinematic_rmse;
  j["nees_bm_in_band_fraction"] = m.nees_bm_in_band;
  j["nees_pm_in_band_fraction"] = m.nees_pm_in_band;
  j["spike_count"] = m.spike_count;
  write_json(j, out_dir + "/report.json");
}

void run_tracking_comparison(const Config& cfg, std::uint64_t seed,
                             const std::string& out_dir,
                             const std::string& policy_file) {
  fs::create_directories(fs::path(out_dir) / "traces");
  const VehicleParams vp = VehicleParams::from_config(cfg);
  const PathGeometry geom = PathGeometry::from_config(cfg);
  const LqWeights lw = LqWeights::from_config(cfg);
  TrackingOptions opt;
  opt.v_ref = cfg.get_double("run.v_ref", 0.5);
  opt.delta_dot_max = cfg.get_double("control.delta_dot_max", 1.221730);

  FfFbParams ffp;
  ffp.k_y = cfg.get_double("control.fffb_ky", ffp.k_y);
  ffp.look_ahead = cfg.get_double("control.fffb_lookahead", ffp.look_ahead);

  std::vector<ControllerSpec> specs;
  specs.push_back({ControllerSpec::Kind::FfFb, ffp, lw, std::nullopt});
  specs.push_back({ControllerSpec::Kind::LqEd, ffp, lw, std::nullopt});
  specs.push_back({ControllerSpec::Kind::LqCm, ffp, lw, std::nullopt});
  bool drl_available = false;
  if (!policy_file.empty() && fs::exists(policy_file)) {
    ControllerSpec drl{ControllerSpec::Kind::Drl, ffp, lw, std::nullopt};
    drl.policy = load_policy(policy_file);
    specs.push_back(std::move(drl));
    drl_available = true;
  }

  const CShape c_shape = make_c_shape(geom);
  struct Scenario {
    std::string name;
    const Path* path;
    const LaneGates* gates;
  };
  const Path o_path = make_o_shape(geom);
  const Path inf_path = make_infinity(geom);
  const std::vector<Scenario> scenarios = {
      {"o_shape", &o_path, nullptr},
      {"infinity", &inf_path, nullptr},
      {"c_shape", &c_shape.path, &c_shape.gates}};

  json j;
  j["seed"] = seed;
  j["drl_included"] = drl_available;
  if (!drl_available) {
    j["drl_status"] = policy_file.empty()
                          ? "skipped: no policy file given"
                          : "skipped: policy file not found: " + policy_file;
  }
  json table = json::array();
  for (const auto& sc : scenarios) {
    for (const auto& spec : specs) {
      const TrackingTrace tr =
          simulate_tracking(*sc.path, sc.gates, spec, vp, opt);
      const KpiReport k = compute_kpis(tr.dy, tr.delta, kTick, tr.t_f);
      json row;
      row["path"] = sc.name;
      row["controller"] = spec.name();
      row["me"] = k.me;
      row["rmse"] = k.rmse;
      row["iaca"] = k.iaca;
      row["t_f"] = k.t_f;
      row["finished"] = tr.finished;
      if (sc.gates) {
        row["gates_pass"] = tr.gates_pass;
        row["min_gate_margin"] = tr.min_gate_margin;
      }
      if (spec.kind == ControllerSpec::Kind::LqEd ||
          spec.kind == ControllerSpec::Kind::LqCm) {
        row["lq_gain"] = {tr.lq_gain(0), tr.lq_gain(1), tr.lq_gain(2),
                          tr.lq_gain(3)};
      }
      table.push_back(row);

      CsvWriter w(out_dir + "/traces/" + sc.name + "_" + spec.name() + ".csv",
                  "tracking_trace_" + sc.name,
                  {"t", "s", "X", "Y", "psi", "v", "dy", "dpsi", "delta",
                   "va"});
      for (std::size_t i = 0; i < tr.t.size(); ++i) {
        w.row({tr.t[i], tr.s[i], tr.x[i], tr.y[i], tr.psi[i], tr.v[i],
               tr.dy[i], tr.dpsi[i], tr.delta[i], tr.va[i]});
      }
    }
  }
  j["kpis"] = table;
  write_json(j, out_dir + "/report.json");
}

void run_training(const Config& cfg, std::uint64_t seed,
                  const std::string& out_dir, bool use_demonstrator) {
  fs::create_directories(fs::path(out_dir));
  const VehicleParams vp = VehicleParams::from_config(cfg);
  const PathGeometry geom = PathGeometry::from_config(cfg);
  const Path s_path = make_s_shape(geom);

  EnvConfig env_cfg;
  env_cfg.vehicle = vp;
  env_cfg.weights = RewardWeights::from_config(cfg);
  if (!use_demonstrator) env_cfg.weights.m6 = 0.0;
  const LqWeights lw = LqWeights::from_config(cfg);
  env_cfg.lq_q = lw.q;
  env_cfg.lq_r = lw.r;
  env_cfg.v_ref = cfg.get_double("run.v_ref", 0.5);
  env_cfg.delta_dot_max = cfg.get_double("control.delta_dot_max", 1.221730);
  const std::vector<double> on = cfg.get_doubles("drl.obs_norm",
                                                 {0.3, 1.0, 0.5, 2.0});
  if (on.size() != 4) throw std::invalid_argument("drl.obs_norm needs 4 values");
  env_cfg.obs_norm = Eigen::Vector4d(on[0], on[1], on[2], on[3]);
  env_cfg.init_offset = cfg.get_double("drl.init_offset", 0.05);

  PathTrackingEnv env(s_path, env_cfg);
  const DdpgConfig dc = DdpgConfig::from_config(cfg);
  const TrainResult result = ddpg_train(env, dc, seed);

  {
    CsvWriter w(out_dir + "/learning_curve.csv", "ddpg_learning_curve",
                {"episode", "cumulative_reward", "mean_reward", "steps",
                 "reward_sum", "eval_rmse", "crashed"});
    for (const auto& e : result.curve) {
      w.row({static_cast<double>(e.episode), e.discounted_return,
             e.mean_return, static_cast<double>(e.steps), e.reward_sum,
             e.eval_rmse, e.crashed ? 1.0 : 0.0});
    }
  }
  export_policy(result.policy, out_dir + "/policy.bin");

  PathTrackingEnv eval_env(s_path, env_cfg);
  double peak = 0.0;
  bool crashed = false;
  const double rmse = evaluate_policy(eval_env, result.policy, &peak, &crashed);

  json j;
  j["seed"] = seed;
  j["demonstrator"] = use_demonstrator;
  j["episodes"] = dc.episodes;
  j["best_episode"] = result.best_episode;
  j["best_eval_rmse"] = result.best_eval_rmse;
  j["final_eval_rmse"] = rmse;
  j["final_eval_max_abs_dy"] = peak;
  j["final_eval_crashed"] = crashed;
  j["diverged"] = result.diverged;
  write_json(j, out_dir + "/report.json");
  if (result.diverged) {
    throw NumericalError("training diverged: no evaluated policy finished");
  }
}

void run_kpi_tool(const std::string& trace_csv, const std::string& out_dir) {
  const CsvTable t = read_csv(trace_csv);
  const std::vector<double> dy = t.column("dy");
  const std::vector<double> delta = t.column("delta");
  const KpiReport k = compute_kpis(dy, delta, kTick);
  fs::create_directories(fs::path(out_dir));
  json j;
  j["trace"] = fs::path(trace_csv).filename().string();
  j["schema"] = t.schema;
  j["me"] = k.me;
  j["rmse"] = k.rmse;
  j["iaca"] = k.iaca;
  j["t_f"] = k.t_f;
  write_json(j, out_dir + "/kpi.json");
}

void run_paths_export(const Config& cfg, const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir));
  const PathGeometry geom = PathGeometry::from_config(cfg);
  make_s_shape(geom).to_csv(out_dir + "/s_shape.csv", "reference_path_s_shape");
  make_o_shape(geom).to_csv(out_dir + "/o_shape.csv", "reference_path_o_shape");
  make_oval(geom).to_csv(out_dir + "/oval.csv", "reference_path_oval");
  make_infinity(geom).to_csv(out_dir + "/infinity.csv",
                             "reference_path_infinity");
  const CShape c = make_c_shape(geom);
  c.path.to_csv(out_dir + "/c_shape.csv", "reference_path_c_shape");

  json gates;
  gates["frame"] = {{"origin_x", c.gates.origin_x},
                    {"origin_y", c.gates.origin_y},
                    {"heading", c.gates.heading}};
  gates["vehicle_width"] = c.gates.vehicle_width;
  json sections = json::array();
  for (const auto& s : c.gates.sections) {
    sections.push_back({{"x0", s.x0},
                        {"x1", s.x1},
                        {"y_center", s.y_center},
                        {"half_width", s.half_width}});
  }
  gates["sections"] = sections;
  write_json(gates, out_dir + "/iso_gates.json");
}

}  // namespace cartwin
