#include "cartwin/identification.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cartwin/errors.hpp"

namespace cartwin {

std::vector<double> moving_average(const std::vector<double>& x, int window) {
  if (window <= 1) return x;
  const int half = window / 2;
  const int n = static_cast<int>(x.size());
  std::vector<double> out(x.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += x[j];
    out[i] = acc / (hi - lo + 1);
  }
  return out;
}

std::pair<double, double> fit_steady_state_line(
    const std::vector<SteadyStatePoint>& points) {
  std::set<double> distinct;
  for (const auto& p : points) distinct.insert(p.input);
  if (distinct.size() < 2) {
    throw std::invalid_argument(
        "fit_steady_state_line: need at least two distinct inputs");
  }
  const double n = static_cast<double>(points.size());
  double su = 0.0, sw = 0.0, suu = 0.0, suw = 0.0;
  for (const auto& p : points) {
    su += p.input;
    sw += p.output;
    suu += p.input * p.input;
    suw += p.input * p.output;
  }
  const double denom = n * suu - su * su;
  const double slope = (n * suw - su * sw) / denom;
  const double intercept = (sw - slope * su) / n;
  return {slope, -intercept};  // w = m_l u - b_l
}

double fit_understeer_gradient(const std::vector<SteadyStatePoint>& points) {
  double sdd = 0.0, sda = 0.0;
  bool any_nonzero = false;
  for (const auto& p : points) {
    if (p.input != 0.0) any_nonzero = true;
    sdd += p.input * p.input;
    sda += p.input * p.output;
  }
  if (!any_nonzero) {
    throw std::invalid_argument(
        "fit_understeer_gradient: need a nonzero-input point");
  }
  if (!(sda > 0.0)) {
    throw std::invalid_argument(
        "fit_understeer_gradient: non-physical sign (sum(delta*a) <= 0)");
  }
  return sdd / sda;
}

double minimize_scalar(const std::function<double(double)>& f, double lo,
                       double hi, int grid_points, double tol) {
  if (!(lo < hi)) throw std::invalid_argument("minimize_scalar: bad bounds");
  // coarse scan pins down the bracket
  double best_x = lo, best_f = f(lo);
  for (int i = 1; i < grid_points; ++i) {
    const double x = lo + (hi - lo) * i / (grid_points - 1);
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  const double step = (hi - lo) / (grid_points - 1);
  double a = std::max(lo, best_x - step);
  double b = std::min(hi, best_x + step);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while ((b - a) > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

std::vector<double> simulate_motor_step(const MotorParams& p, double va,
                                        std::size_t n_samples, double dt) {
  std::vector<double> out(n_samples);
  double omega = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    out[i] = omega;
    omega = rk4_step(omega, dt, [&](double w) {
      return motor_speed_derivative(w, va, p);
    });
  }
  return out;
}

std::vector<double> simulate_lateral_accel_step(const ChassisParams& cp,
                                                double delta, double v,
                                                std::size_t n_samples,
                                                double dt) {
  struct Lat {
    double beta, r;
    Lat operator+(const Lat& o) const { return {beta + o.beta, r + o.r}; }
    Lat operator*(double k) const { return {beta * k, r * k}; }
  };
  const double cf = cp.cf, cr = cp.cr, lf = cp.lf, lr = cp.lr;
  const double m = cp.mass, ig = cp.yaw_inertia;
  const auto deriv = [&](const Lat& s) -> Lat {
    // constant speed: the m*v_dot damping term vanishes
    const double bdot =
        (-(cf + cr) * s.beta - (cf * lf / v - cr * lr / v + m * v) * s.r +
         cf * delta) /
        (m * v);
    const double rdot = (-(cf * lf - cr * lr) * s.beta -
                         ((cf * lf * lf + cr * lr * lr) / v) * s.r +
                         cf * lf * delta) /
                        ig;
    return {bdot, rdot};
  };
  std::vector<double> out(n_samples);
  Lat s{0.0, 0.0};
  for (std::size_t i = 0; i < n_samples; ++i) {
    const Lat d = deriv(s);
    out[i] = v * (d.beta + s.r);
    s = rk4_step(s, dt, deriv);
  }
  return out;
}

namespace {

double transient_cost(const std::vector<const StepExperiment*>& exps,
                      const std::vector<std::vector<double>>& filtered,
                      const std::function<std::vector<double>(
                          const StepExperiment&)>& simulate,
                      int filter_window) {
  double cost = 0.0;
  for (std::size_t j = 0; j < exps.size(); ++j) {
    const auto& exp = *exps[j];
    const std::vector<double> sim =
        moving_average(simulate(exp), filter_window);
    double acc = 0.0;
    for (std::size_t k = 0; k < exp.samples.size(); ++k) {
      const double e = filtered[j][k] - sim[k];
      acc += e * e * exp.dt;
    }
    cost += acc / exp.duration();
  }
  return cost;
}

}  // namespace

double identify_p2(const std::vector<StepExperiment>& experiments, double m_l,
                   double b_l, double lo, double hi,
                   const MotorParams& fixed_geometry, int filter_window) {
  if (experiments.empty()) {
    throw std::invalid_argument("identify_p2: no experiments");
  }
  if (!(lo > 0.0 && lo < hi)) {
    throw std::invalid_argument("identify_p2: bounds must be 0 < lo < hi");
  }
  std::vector<const StepExperiment*> exps;
  std::vector<std::vector<double>> filtered;
  for (const auto& e : experiments) {
    if (e.kind != ExperimentKind::Longitudinal) {
      throw std::invalid_argument("identify_p2: longitudinal data expected");
    }
    exps.push_back(&e);
    filtered.push_back(moving_average(e.samples, filter_window));
  }
  const auto cost = [&](double p2) {
    MotorParams p = fixed_geometry;
    p.p2 = p2;
    p.p1 = m_l * p2;
    p.p3 = b_l * p2;
    return transient_cost(
        exps, filtered,
        [&](const StepExperiment& e) {
          return simulate_motor_step(p, e.input_level, e.samples.size(), e.dt);
        },
        filter_window);
  };
  return minimize_scalar(cost, lo, hi);
}

std::pair<double, double> identify_cf(
    const std::vector<StepExperiment>& experiments, double k_su, double v,
    const ChassisParams& fixed_geometry, double lo, double hi,
    int filter_window) {
  if (experiments.empty()) {
    throw std::invalid_argument("identify_cf: no experiments");
  }
  if (!(lo > 0.0 && lo < hi)) {
    throw std::invalid_argument("identify_cf: bounds must be 0 < lo < hi");
  }
  const double lf = fixed_geometry.lf, lr = fixed_geometry.lr;
  // Cr = Cf (k_su lf v^2 - lf^2) / lr^2 is linear in Cf, so the sign of
  // the bracket decides feasibility across the whole interval.
  const double bracket = k_su * lf * v * v - lf * lf;
  if (!(bracket > 0.0)) {
    throw std::invalid_argument(
        "identify_cf: understeer constraint gives Cr <= 0 inside bounds");
  }
  std::vector<const StepExperiment*> exps;
  std::vector<std::vector<double>> filtered;
  for (const auto& e : experiments) {
    if (e.kind != ExperimentKind::Lateral) {
      throw std::invalid_argument("identify_cf: lateral data expected");
    }
    exps.push_back(&e);
    filtered.push_back(moving_average(e.samples, filter_window));
  }
  const auto cr_of = [&](double cf) { return cf * bracket / (lr * lr); };
  const auto cost = [&](double cf) {
    ChassisParams cp = fixed_geometry;
    cp.cf = cf;
    cp.cr = cr_of(cf);
    return transient_cost(
        exps, filtered,
        [&](const StepExperiment& e) {
          return simulate_lateral_accel_step(cp, e.input_level, v,
                                             e.samples.size(), e.dt);
        },
        filter_window);
  };
  const double cf_star = minimize_scalar(cost, lo, hi);
  return {cf_star, cr_of(cf_star)};
}

double rmse_percent(const std::vector<double>& measured,
                    const std::vector<double>& predicted) {
  if (measured.size() != predicted.size() || measured.empty()) {
    throw std::invalid_argument("rmse_percent: length mismatch");
  }
  double acc = 0.0;
  double lo = measured[0], hi = measured[0];
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double e = measured[i] - predicted[i];
    acc += e * e;
    lo = std::min(lo, measured[i]);
    hi = std::max(hi, measured[i]);
  }
  const double range = hi - lo;
  if (!(range > 0.0)) {
    throw std::invalid_argument("rmse_percent: flat measured series");
  }
  return 100.0 * std::sqrt(acc / measured.size()) / range;
}

}  // namespace cartwin
