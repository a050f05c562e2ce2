#include "raman/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

namespace raman {

namespace {

double hermite(double th, double h, double y0, double f0, double y1, double f1) {
  const double u = 1.0 - th;
  return (1.0 + 2.0 * th) * u * u * y0 + th * u * u * h * f0 +
         th * th * (3.0 - 2.0 * th) * y1 + th * th * (th - 1.0) * h * f1;
}

std::size_t find_segment(const std::vector<double>& ts, double at) {
  if (ts.size() < 2) throw EngineError("trajectory has no interpolation segment");
  const double slack = 1e-9 * (ts.back() - ts.front());
  if (at < ts.front() - slack || at > ts.back() + slack)
    throw EngineError("evaluation time outside the sampled range");
  auto it = std::upper_bound(ts.begin(), ts.end(), at);
  std::size_t k = static_cast<std::size_t>(it - ts.begin());
  if (k == 0) k = 1;
  if (k >= ts.size()) k = ts.size() - 1;
  return k - 1;
}

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& y1, double rtol, double atol) {
  double acc = 0.0;
  const Eigen::Index n = err.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sc;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

double initial_step(const Eigen::VectorXd& y, const Eigen::VectorXd& f, double span,
                    const SimConfig& cfg) {
  if (cfg.first_step > 0.0) return std::min(cfg.first_step, span);
  double d0 = 0.0, d1 = 0.0;
  const Eigen::Index n = y.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc = cfg.atol + cfg.rtol * std::abs(y[i]);
    d0 += (y[i] / sc) * (y[i] / sc);
    d1 += (f[i] / sc) * (f[i] / sc);
  }
  d0 = std::sqrt(d0 / static_cast<double>(n));
  d1 = std::sqrt(d1 / static_cast<double>(n));
  double h = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 * span : 0.01 * d0 / d1;
  h = std::min(h, span);
  if (cfg.max_step > 0.0) h = std::min(h, cfg.max_step);
  return h;
}

struct StepUnderflow {
  double t;
};

// Dormand-Prince 5(4) with the first-same-as-last evaluation.
struct ExplicitStepper {
  static constexpr bool kFillsF1 = true;
  static constexpr double kOrderExp = 0.2;

  const CompiledSystem& sys;
  Eigen::VectorXd k2, k3, k4, k5, k6, ytmp;

  ExplicitStepper(const CompiledSystem& s, int n) : sys(s), k2(n), k3(n), k4(n), k5(n), k6(n), ytmp(n) {}

  void attempt(const Eigen::VectorXd& y, const Eigen::VectorXd& f0, double h, Eigen::VectorXd& y1,
               Eigen::VectorXd& err, Eigen::VectorXd& f1) {
    constexpr double a21 = 1.0 / 5.0;
    constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                     a54 = -212.0 / 729.0;
    constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                     a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                     b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                     e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    ytmp = y + h * (a21 * f0);
    sys.eval(ytmp.data(), k2.data());
    ytmp = y + h * (a31 * f0 + a32 * k2);
    sys.eval(ytmp.data(), k3.data());
    ytmp = y + h * (a41 * f0 + a42 * k2 + a43 * k3);
    sys.eval(ytmp.data(), k4.data());
    ytmp = y + h * (a51 * f0 + a52 * k2 + a53 * k3 + a54 * k4);
    sys.eval(ytmp.data(), k5.data());
    ytmp = y + h * (a61 * f0 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    sys.eval(ytmp.data(), k6.data());
    y1 = y + h * (b1 * f0 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    sys.eval(y1.data(), f1.data());
    err = h * (e1 * f0 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * f1);
  }
};

// Kaps-Rentrop fourth-order Rosenbrock; one Jacobian and one LU per step.
struct RosenbrockStepper {
  static constexpr bool kFillsF1 = false;
  static constexpr double kOrderExp = 0.25;

  const CompiledSystem& sys;
  Eigen::MatrixXd jac, lhs;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::VectorXd g1, g2, g3, g4, ytmp, ftmp;

  RosenbrockStepper(const CompiledSystem& s, int n)
      : sys(s), jac(n, n), lhs(n, n), g1(n), g2(n), g3(n), g4(n), ytmp(n), ftmp(n) {}

  void attempt(const Eigen::VectorXd& y, const Eigen::VectorXd& f0, double h, Eigen::VectorXd& y1,
               Eigen::VectorXd& err, Eigen::VectorXd&) {
    constexpr double gam = 0.5;
    constexpr double a21 = 2.0;
    constexpr double a31 = 48.0 / 25.0, a32 = 6.0 / 25.0;
    constexpr double c21 = -8.0;
    constexpr double c31 = 372.0 / 25.0, c32 = 12.0 / 5.0;
    constexpr double c41 = -112.0 / 125.0, c42 = -54.0 / 125.0, c43 = -2.0 / 5.0;
    constexpr double b1 = 19.0 / 9.0, b2 = 1.0 / 2.0, b3 = 25.0 / 108.0, b4 = 125.0 / 108.0;
    constexpr double e1 = 17.0 / 54.0, e2 = 7.0 / 36.0, e4 = 125.0 / 108.0;

    sys.jacobian(y.data(), jac);
    lhs = -jac;
    lhs.diagonal().array() += 1.0 / (gam * h);
    lu.compute(lhs);

    g1 = lu.solve(f0);
    ytmp = y + a21 * g1;
    sys.eval(ytmp.data(), ftmp.data());
    g2 = lu.solve(ftmp + (c21 / h) * g1);
    ytmp = y + a31 * g1 + a32 * g2;
    sys.eval(ytmp.data(), ftmp.data());
    g3 = lu.solve(ftmp + (c31 * g1 + c32 * g2) / h);
    g4 = lu.solve(ftmp + (c41 * g1 + c42 * g2 + c43 * g3) / h);  // stage shares the stage-3 argument
    y1 = y + b1 * g1 + b2 * g2 + b3 * g3 + b4 * g4;
    err = e1 * g1 + e2 * g2 + e4 * g4;
  }
};

template <typename Stepper>
Trajectory run_integration(const CompiledSystem& sys, Stepper& stepper, const Eigen::VectorXd& y0,
                           double t0, double t1, const SimConfig& cfg, Method tag,
                           double stiffness) {
  const int n = sys.n_real();
  const double span = t1 - t0;
  Trajectory out;
  out.method_used = tag;

  Eigen::VectorXd y = y0, f(n), y1(n), err(n), f1(n), ynode(n), fnode(n);
  sys.eval(y.data(), f.data());
  out.t.push_back(t0);
  out.y.push_back(y);
  out.f.push_back(f);

  const int n_out = std::max(cfg.n_out, 0);
  const double dt_out = n_out > 0 ? span / n_out : 0.0;
  int next_out = 1;

  double t = t0;
  double h = initial_step(y, f, span, cfg);
  long budget = cfg.max_steps;
  const double floor_scale = 16.0 * std::numeric_limits<double>::epsilon();

  while (t < t1) {
    bool clipped = false;
    if (h >= t1 - t) {
      h = t1 - t;
      clipped = true;
    }
    if (!clipped && h < floor_scale * std::max(std::abs(t), span)) throw StepUnderflow{t};
    if (budget-- <= 0) {
      std::ostringstream msg;
      msg << "step budget of " << cfg.max_steps << " exhausted at t=" << t << " of (" << t0 << ", "
          << t1 << ")";
      if (tag == Method::nonstiff && stiffness > cfg.stiff_threshold)
        msg << "; rate*span=" << stiffness << " marks the problem as stiff for the explicit "
            << "method, switch to the stiff one";
      throw EngineError(msg.str());
    }

    stepper.attempt(y, f, h, y1, err, f1);
    const double en = error_norm(err, y, y1, cfg.rtol, cfg.atol);
    if (!std::isfinite(en)) {
      ++out.n_rejected;
      h *= 0.1;
      continue;
    }

    if (en <= 1.0) {
      const double tn = clipped ? t1 : t + h;
      if (!Stepper::kFillsF1) sys.eval(y1.data(), f1.data());
      while (n_out > 0 && next_out < n_out) {
        const double to = t0 + next_out * dt_out;
        if (to > tn) break;
        const double th = (to - t) / h;
        for (int i = 0; i < n; ++i) ynode[i] = hermite(th, h, y[i], f[i], y1[i], f1[i]);
        sys.eval(ynode.data(), fnode.data());
        out.t.push_back(to);
        out.y.push_back(ynode);
        out.f.push_back(fnode);
        ++next_out;
      }
      if (n_out == 0 || tn >= t1) {
        out.t.push_back(tn);
        out.y.push_back(y1);
        out.f.push_back(f1);
      }
      t = tn;
      y.swap(y1);
      f.swap(f1);
      ++out.n_accepted;
      h *= std::clamp(0.9 * std::pow(std::max(en, 1e-12), -Stepper::kOrderExp), 0.2, 5.0);
    } else {
      ++out.n_rejected;
      h *= std::clamp(0.9 * std::pow(en, -Stepper::kOrderExp), 0.1, 0.9);
    }
    if (cfg.max_step > 0.0) h = std::min(h, cfg.max_step);
  }
  return out;
}

}  // namespace

Eigen::VectorXd Trajectory::eval(double at) const {
  const std::size_t k = find_segment(t, at);
  const double h = t[k + 1] - t[k];
  const double th = (at - t[k]) / h;
  Eigen::VectorXd out(y[k].size());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = hermite(th, h, y[k][i], f[k][i], y[k + 1][i], f[k + 1][i]);
  return out;
}

double Trajectory::eval_slot(double at, int slot) const {
  const std::size_t k = find_segment(t, at);
  const double h = t[k + 1] - t[k];
  const double th = (at - t[k]) / h;
  return hermite(th, h, y[k][slot], f[k][slot], y[k + 1][slot], f[k + 1][slot]);
}

Trajectory integrate(const CompiledSystem& sys, const Eigen::VectorXd& y0, double t0, double t1,
                     const SimConfig& cfg) {
  if (y0.size() != sys.n_real()) {
    std::ostringstream msg;
    msg << "state size mismatch: got " << y0.size() << " components, system has " << sys.n_real();
    throw EngineError(msg.str());
  }
  if (!(t1 > t0)) throw EngineError("integration interval is empty");
  if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) throw EngineError("tolerances must be positive");

  const double stiffness = sys.diag_rate_scale() * (t1 - t0);
  Method m = cfg.method;
  if (m == Method::automatic)
    m = stiffness > cfg.stiff_threshold ? Method::stiff : Method::nonstiff;

  const int n = sys.n_real();
  if (m == Method::stiff) {
    RosenbrockStepper stepper(sys, n);
    try {
      return run_integration(sys, stepper, y0, t0, t1, cfg, Method::stiff, stiffness);
    } catch (const StepUnderflow& u) {
      std::ostringstream msg;
      msg << "step size underflow at t=" << u.t << " with the stiff integrator";
      throw EngineError(msg.str());
    }
  }

  ExplicitStepper stepper(sys, n);
  try {
    return run_integration(sys, stepper, y0, t0, t1, cfg, Method::nonstiff, stiffness);
  } catch (const StepUnderflow&) {
    SimConfig retry = cfg;
    if (retry.n_out > 1) retry.n_out /= 2;  // halve the output cadence and try once more
    ExplicitStepper again(sys, n);
    try {
      return run_integration(sys, again, y0, t0, t1, retry, Method::nonstiff, stiffness);
    } catch (const StepUnderflow& u) {
      std::ostringstream msg;
      msg << "explicit step size underflow at t=" << u.t << "; rate*span=" << stiffness
          << " marks the problem as stiff, rerun with the stiff method";
      throw EngineError(msg.str());
    }
  }
}

SteadyState find_steady_state(const CompiledSystem& sys, const Eigen::VectorXd& y0,
                              const SimConfig& cfg) {
  const int n = sys.n_real();
  if (y0.size() != n) throw EngineError("state size mismatch");
  if (!sys.binds().has("gamma12") || sys.binds().get("gamma12").real() <= 0.0)
    throw EngineError("steady state requires repumping: gamma12 must be positive");
  const double rate = sys.decay_rate_scale();
  if (!(rate > 0.0)) throw EngineError("system has no relaxation rate, it cannot settle");

  SimConfig icfg = cfg;
  icfg.n_out = 1;  // only the chunk endpoints matter

  Eigen::VectorXd y = y0, f(n);
  auto scaled_residual = [&](const Eigen::VectorXd& yy) {
    sys.eval(yy.data(), f.data());
    return f.norm() / (rate * std::max(yy.norm(), 1e-12));
  };

  double chunk = 10.0 / rate;
  double total = 0.0;
  double resid = std::numeric_limits<double>::infinity();
  bool settled = false;
  for (int k = 0; k < 64; ++k) {
    Trajectory tr = integrate(sys, y, 0.0, chunk, icfg);
    y = tr.y.back();
    total += chunk;
    resid = scaled_residual(y);
    if (resid < cfg.steady_tol) {
      settled = true;
      break;
    }
    chunk = std::min(chunk * 1.6, 2e5 / rate);
  }
  if (!settled) {
    std::ostringstream msg;
    msg << "no steady state after t=" << total << ": scaled residual " << resid
        << " is above the tolerance " << cfg.steady_tol;
    throw EngineError(msg.str());
  }

  // Damped Newton polish with a minimal-norm least-squares step: the flow
  // conserves population sums, so the Jacobian is singular along them.
  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd fy(n), ytry(n), ftry(n);
  sys.eval(y.data(), fy.data());
  double best = fy.norm();
  for (int it = 0; it < 12 && best > 0.0; ++it) {
    sys.jacobian(y.data(), jac);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    const Eigen::VectorXd step = svd.solve(-fy);
    double alpha = 1.0;
    bool improved = false;
    for (int half = 0; half < 8; ++half, alpha *= 0.5) {
      ytry = y + alpha * step;
      sys.eval(ytry.data(), ftry.data());
      if (ftry.norm() < best) {
        y = ytry;
        fy = ftry;
        best = ftry.norm();
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  SteadyState out;
  out.y = y;
  out.residual = best / (rate * std::max(y.norm(), 1e-12));
  out.t_relax = total;
  return out;
}

PulseMetrics pulse_metrics(const Trajectory& traj, int slot, double prominence) {
  if (traj.size() < 3) throw NoPulseError("trajectory has too few samples for a pulse");
  if (slot < 0 || slot >= traj.y.front().size()) throw EngineError("slot index out of range");

  const std::size_t m = traj.size();
  std::size_t imax = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (traj.y[i][slot] > traj.y[imax][slot]) imax = i;
  if (imax == 0 || imax + 1 == m)
    throw NoPulseError("signal is monotone over the run: no interior pulse maximum");

  // golden-section refinement of the peak inside the bracketing samples
  double a = traj.t[imax - 1], b = traj.t[imax + 1];
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double s1 = traj.eval_slot(x1, slot), s2 = traj.eval_slot(x2, slot);
  const double span = traj.t.back() - traj.t.front();
  for (int it = 0; it < 200 && (b - a) > 1e-13 * span; ++it) {
    if (s1 < s2) {
      a = x1;
      x1 = x2;
      s1 = s2;
      x2 = a + gr * (b - a);
      s2 = traj.eval_slot(x2, slot);
    } else {
      b = x2;
      x2 = x1;
      s2 = s1;
      x1 = b - gr * (b - a);
      s1 = traj.eval_slot(x1, slot);
    }
  }

  PulseMetrics pm;
  pm.t_peak = 0.5 * (a + b);
  pm.peak = traj.eval_slot(pm.t_peak, slot);
  pm.delay = pm.t_peak - traj.t.front();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  pm.fwhm = pm.t_rise = pm.t_decay = nan;

  const double half = 0.5 * pm.peak;
  double t_left = nan, t_right = nan;
  {
    long j = static_cast<long>(imax);
    while (j >= 0 && traj.y[static_cast<std::size_t>(j)][slot] >= half) --j;
    if (j >= 0) {
      double lo = traj.t[static_cast<std::size_t>(j)], hi = traj.t[static_cast<std::size_t>(j) + 1];
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (traj.eval_slot(mid, slot) < half ? lo : hi) = mid;
      }
      t_left = 0.5 * (lo + hi);
      pm.t_rise = pm.t_peak - t_left;
    }
  }
  {
    std::size_t j = imax;
    while (j < m && traj.y[j][slot] >= half) ++j;
    if (j < m) {
      double lo = traj.t[j - 1], hi = traj.t[j];
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (traj.eval_slot(mid, slot) >= half ? lo : hi) = mid;
      }
      t_right = 0.5 * (lo + hi);
      pm.t_decay = t_right - pm.t_peak;
    }
  }
  if (std::isfinite(t_left) && std::isfinite(t_right)) pm.fwhm = t_right - t_left;

  // ringing after the peak: hysteresis counter with a prominence band
  const double band = prominence * pm.peak;
  bool descending = true;
  double cur_min = pm.peak, cur_max = pm.peak;
  int count = 0;
  for (std::size_t i = imax + 1; i < m; ++i) {
    const double s = traj.y[i][slot];
    if (descending) {
      cur_min = std::min(cur_min, s);
      if (s > cur_min + band) {
        descending = false;
        cur_max = s;
        ++count;
      }
    } else {
      cur_max = std::max(cur_max, s);
      if (s < cur_max - band) {
        descending = true;
        cur_min = s;
      }
    }
  }
  pm.n_tail_maxima = count;
  return pm;
}

SweepTable sweep_points(const std::string& parameter, const std::vector<double>& values,
                        const PointRunner& run, int threads) {
  SweepTable table;
  table.parameter = parameter;
  table.points.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) table.points[i].value = values[i];

  auto work = [&](std::size_t i) {
    try {
      table.points[i].out = run(values[i]);
    } catch (const std::exception& e) {
      table.points[i].error = e.what();
    } catch (...) {
      table.points[i].error = "unknown failure";
    }
  };

  const int n_workers =
      std::max(1, std::min<int>(threads, static_cast<int>(values.size())));
  if (n_workers <= 1 || values.size() <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) work(i);
    return table;
  }

  work(0);  // warm up shared name tables before going parallel
  std::atomic<std::size_t> cursor{1};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = cursor.fetch_add(1); i < values.size(); i = cursor.fetch_add(1)) work(i);
    });
  for (auto& th : pool) th.join();
  return table;
}

SweepTable sweep(std::shared_ptr<const MomentSystem> sys, const ParamBindings& base,
                 const std::string& parameter, const std::vector<double>& values,
                 const Reducer& reduce, int threads) {
  if (!sys) throw EngineError("sweep needs a moment system");
  if (!param_exists(parameter) || !base.has(parameter))
    throw EngineError("unknown sweep parameter: " + parameter);
  PointRunner run = [sys, base, parameter, &reduce](double v) {
    ParamBindings b = base;
    b.set(parameter, cplx(v, 0.0));
    return reduce(*bind_params(sys, b));
  };
  return sweep_points(parameter, values, run, threads);
}

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw EngineError("log-log fit needs at least two matching samples");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw EngineError("log-log fit needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) throw EngineError("log-log fit needs a spread of abscissa values");
  LineFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  return fit_loglog(x, y).slope;
}

}  // namespace raman
