#include "cartwin/control.hpp"

#include <algorithm>
#include <cmath>

#include "cartwin/errors.hpp"

namespace cartwin {

ErrorStateModel error_state_model(double v, const ChassisParams& cp,
                                  double dt) {
  if (!(v > kMinLateralSpeed)) {
    throw std::invalid_argument("error_state_model: v must exceed v_min");
  }
  const double cf = cp.cf, cr = cp.cr, lf = cp.lf, lr = cp.lr;
  const double m = cp.mass, ig = cp.yaw_inertia;
  ErrorStateModel esm;
  esm.a.setZero();
  esm.a(0, 1) = 1.0;
  esm.a(1, 1) = -(cf + cr) / (m * v);
  esm.a(1, 2) = (cf + cr) / m;
  esm.a(1, 3) = (-cf * lf + cr * lr) / (m * v);
  esm.a(2, 3) = 1.0;
  esm.a(3, 1) = (-cf * lf + cr * lr) / (ig * v);
  esm.a(3, 2) = (cf * lf - cr * lr) / ig;
  esm.a(3, 3) = -(cf * lf * lf + cr * lr * lr) / (ig * v);
  esm.b << 0.0, cf / m, 0.0, cf * lf / ig;

  // ZOH via the augmented matrix [[A, B], [0, 0]]: its exponential holds
  // Ad in the top-left block and Bd in the top-right column.
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(5, 5);
  aug.topLeftCorner<4, 4>() = esm.a;
  aug.topRightCorner<4, 1>() = esm.b;
  const Eigen::MatrixXd e = expm(aug * dt);
  esm.ad = e.topLeftCorner<4, 4>();
  esm.bd = e.topRightCorner<4, 1>();
  esm.v_design = v;
  esm.dt = dt;
  return esm;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n) throw std::invalid_argument("expm: square matrix only");
  double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  const Eigen::MatrixXd x = m / std::ldexp(1.0, squarings);
  Eigen::MatrixXd e = Eigen::MatrixXd::Identity(n, n);
  for (int k = 6; k >= 1; --k) {
    e = Eigen::MatrixXd::Identity(n, n) + (x * e) / k;
  }
  for (int i = 0; i < squarings; ++i) e = e * e;
  return e;
}

LqGain solve_discrete_riccati(const Eigen::Matrix4d& ad,
                              const Eigen::Vector4d& bd,
                              const Eigen::Matrix4d& q, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("riccati: R must be > 0");
  Eigen::Matrix4d p = q;
  constexpr int kMaxIter = 100000;
  bool converged = false;
  for (int it = 0; it < kMaxIter; ++it) {
    const Eigen::Vector4d pb = p * bd;
    const double denom = r + bd.dot(pb);
    const Eigen::RowVector4d btpa = bd.transpose() * p * ad;
    const Eigen::Matrix4d next =
        ad.transpose() * p * ad -
        (ad.transpose() * pb) * btpa / denom + q;
    const double delta = (next - p).cwiseAbs().maxCoeff();
    p = 0.5 * (next + next.transpose());
    if (delta < 1e-10) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("riccati: no convergence");
  LqGain g;
  const double denom = r + bd.dot(p * bd);
  g.k = (bd.transpose() * p * ad) / denom;
  g.q = q;
  g.r = r;
  // With zero state cost the fixed point is P = 0, K = 0 and the closed
  // loop equals the open loop; the stability assertion only applies to
  // actual designs.
  if (q.cwiseAbs().maxCoeff() > 0.0) {
    const double rho = closed_loop_radius(ad, bd, g.k);
    if (!(rho < 1.0)) {
      throw NumericalError("riccati: closed loop not stable (rho=" +
                           std::to_string(rho) + ")");
    }
  }
  return g;
}

double closed_loop_radius(const Eigen::Matrix4d& ad, const Eigen::Vector4d& bd,
                          const Eigen::RowVector4d& k) {
  const Eigen::Matrix4d acl = ad - bd * k;
  return acl.eigenvalues().cwiseAbs().maxCoeff();
}

double steady_state_steer(double kappa_ref, const ChassisParams& cp) {
  return kappa_ref * (cp.cf * cp.lf * cp.lf + cp.cr * cp.lr * cp.lr) /
         (cp.cf * cp.lf);
}

double steady_state_heading_error(double kappa_ref, double v,
                                  const ChassisParams& cp) {
  return -kappa_ref *
         (cp.lr - cp.lf * cp.mass * v * v / (cp.cr * cp.wheelbase()));
}

namespace {

Eigen::Vector4d as_vector(const TrackingErrors& xe) {
  return Eigen::Vector4d(xe.dy, xe.dy_dot, xe.dpsi, xe.dr);
}

}  // namespace

double lq_ed(const TrackingErrors& xe, const LqGain& gain,
             const ChassisParams& cp) {
  const double delta = -gain.k * as_vector(xe);
  return std::clamp(delta, -cp.delta_max, cp.delta_max);
}

double lq_cm(const TrackingErrors& xe, const LqGain& gain, double kappa_ref,
             double v, const ChassisParams& cp) {
  const double e_psi_ss = steady_state_heading_error(kappa_ref, v, cp);
  const double ff = steady_state_steer(kappa_ref, cp) + gain.k(2) * e_psi_ss;
  const double delta = -gain.k * as_vector(xe) + ff;
  return std::clamp(delta, -cp.delta_max, cp.delta_max);
}

double ff_fb(const TrackingErrors& xe, double kappa_ref, double v,
             const ChassisParams& cp, const FfFbParams& p) {
  (void)v;
  // Positive dy means the vehicle sits left of the path and positive
  // steering turns left, so the blended error enters with a minus sign.
  const double delta = steady_state_steer(kappa_ref, cp) -
                       p.k_y * (xe.dy + p.look_ahead * xe.dpsi);
  return std::clamp(delta, -cp.delta_max, cp.delta_max);
}

double rate_limit_and_saturate(double delta_cmd, double delta_prev, double dt,
                               double rate_max, double delta_max) {
  if (!(dt > 0.0)) throw std::invalid_argument("rate limit: dt must be > 0");
  const double max_step = rate_max * dt;
  const double step = std::clamp(delta_cmd - delta_prev, -max_step, max_step);
  return std::clamp(delta_prev + step, -delta_max, delta_max);
}

PiGains PiGains::from_config(const Config& cfg) {
  PiGains g;
  g.kp = cfg.get_double("control.pi_kp", g.kp);
  g.ki = cfg.get_double("control.pi_ki", g.ki);
  g.va_min = cfg.get_double("control.va_min", g.va_min);
  g.va_max = cfg.get_double("control.va_max", g.va_max);
  if (g.kp < 0.0 || g.ki < 0.0) {
    throw std::invalid_argument("pi gains must be >= 0");
  }
  return g;
}

double PiSpeedControl::update(double v_ref, double v, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pi: dt must be > 0");
  const double e = v_ref - v;
  const double candidate = integrator_ + e * dt;
  const double u_unsat = gains_.kp * e + gains_.ki * candidate;
  const double u = std::clamp(u_unsat, gains_.va_min, gains_.va_max);
  const bool saturating_up = u_unsat > gains_.va_max && e > 0.0;
  const bool saturating_down = u_unsat < gains_.va_min && e < 0.0;
  if (!saturating_up && !saturating_down) integrator_ = candidate;
  return u;
}

LqSteering::LqSteering(const ChassisParams& cp, const Eigen::Matrix4d& q,
                       double r, double v_design, Mode mode, double dt)
    : cp_(cp), q_(q), r_(r), dt_(dt), mode_(mode) {
  const ErrorStateModel esm = error_state_model(v_design, cp_, dt_);
  gain_ = solve_discrete_riccati(esm.ad, esm.bd, q_, r_);
  gain_.v_design = v_design;
}

double LqSteering::update(const TrackingErrors& xe, double kappa_ref,
                          double v) {
  if (std::abs(v - gain_.v_design) > 0.05 && v > kMinLateralSpeed) {
    const ErrorStateModel esm = error_state_model(v, cp_, dt_);
    gain_ = solve_discrete_riccati(esm.ad, esm.bd, q_, r_);
    gain_.v_design = v;
  }
  if (mode_ == Mode::Feedback) return lq_ed(xe, gain_, cp_);
  return lq_cm(xe, gain_, kappa_ref, v, cp_);
}

LqWeights LqWeights::from_config(const Config& cfg) {
  LqWeights w;
  const std::vector<double> q =
      cfg.get_doubles("control.lq_q", {30.0, 1.0, 5.0, 1.0});
  if (q.size() != 4) throw std::invalid_argument("control.lq_q needs 4 values");
  w.q = Eigen::Vector4d(q[0], q[1], q[2], q[3]).asDiagonal();
  w.r = cfg.get_double("control.lq_r", 20.0);
  return w;
}

}  // namespace cartwin
