#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "raman/cumulant.hpp"

namespace raman {

struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown by pulse_metrics when the signal has no interior maximum.
struct NoPulseError : EngineError {
  using EngineError::EngineError;
};

enum class Method {
  automatic,  // stiff when diag_rate_scale * span exceeds the threshold
  nonstiff,   // adaptive fifth-order explicit Runge-Kutta
  stiff,      // fourth-order Rosenbrock with the analytic Jacobian
};

struct SimConfig {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = 0.0;    // 0: unlimited
  double first_step = 0.0;  // 0: estimated from the initial derivative
  Method method = Method::automatic;
  double stiff_threshold = 1e5;  // dimensionless rate * span
  long max_steps = 20'000'000;
  int n_out = 0;  // 0: record accepted steps; else n_out+1 uniform samples
  double steady_tol = 1e-8;
  int threads = 1;
};

// Sampled solution with node derivatives; eval interpolates with a cubic
// Hermite segment, so queries are only valid inside [t.front(), t.back()].
// Node values carry the integrator tolerance; between nodes the cubic is
// fourth order in the local spacing, roughly one order looser.
struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> y;
  std::vector<Eigen::VectorXd> f;
  Method method_used = Method::nonstiff;
  long n_accepted = 0;
  long n_rejected = 0;

  std::size_t size() const { return t.size(); }
  Eigen::VectorXd eval(double at) const;
  double eval_slot(double at, int slot) const;
};

// Integrates dy/dt = f(y) from t0 to t1.  Method::automatic switches to the
// Rosenbrock scheme when the fastest linear rate times the span exceeds
// cfg.stiff_threshold.  An explicit run that underflows its step size is
// retried once with the output cadence halved, then rejected with a
// stiffness diagnostic.
Trajectory integrate(const CompiledSystem& sys, const Eigen::VectorXd& y0, double t0, double t1,
                     const SimConfig& cfg = {});

struct SteadyState {
  Eigen::VectorXd y;
  double residual = 0.0;  // |f| / (decay_rate_scale * |y|) at the returned point
  double t_relax = 0.0;   // total time integrated before convergence
};

// Relaxes y0 in growing chunks until the scaled derivative norm drops below
// cfg.steady_tol, then polishes with damped least-squares Newton steps.
// Requires a positive repumping rate (gamma12): without it the atoms empty
// out and no pumped stationary point exists.
SteadyState find_steady_state(const CompiledSystem& sys, const Eigen::VectorXd& y0,
                              const SimConfig& cfg = {});

struct PulseMetrics {
  double t_peak = 0.0;
  double peak = 0.0;
  double fwhm = 0.0;    // width at half the peak value (zero baseline)
  double t_rise = 0.0;  // peak time minus the left half crossing
  double t_decay = 0.0;  // right half crossing minus the peak time
  double delay = 0.0;    // peak time relative to the trajectory start
  int n_tail_maxima = 0;  // ringing maxima after the peak, by prominence
};

// Shape of the pulse carried by one real component of the trajectory.
// Throws NoPulseError when the maximum sits on the boundary of the run.
// A missing half crossing on either side leaves the affected widths NaN.
PulseMetrics pulse_metrics(const Trajectory& traj, int slot, double prominence = 0.02);

struct SweepPoint {
  double value = 0.0;
  std::map<std::string, double> out;
  std::string error;  // empty on success
};

struct SweepTable {
  std::string parameter;
  std::vector<SweepPoint> points;
};

using PointRunner = std::function<std::map<std::string, double>(double value)>;
using Reducer = std::function<std::map<std::string, double>(const CompiledSystem& sys)>;

// Runs one reduction per value; a throwing point records its message and the
// remaining points still run.  Points are independent, so extra threads only
// change the schedule, never the table.
SweepTable sweep_points(const std::string& parameter, const std::vector<double>& values,
                        const PointRunner& run, int threads = 1);

// Rebinds `parameter` for each value and reduces the compiled system.
// Unknown parameter names are rejected up front.
SweepTable sweep(std::shared_ptr<const MomentSystem> sys, const ParamBindings& base,
                 const std::string& parameter, const std::vector<double>& values,
                 const Reducer& reduce, int threads = 1);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Least-squares line through (log x, log y); inputs must be positive.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace raman
