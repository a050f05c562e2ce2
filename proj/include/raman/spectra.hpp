#pragma once
// Steady-state emission spectrum of the cavity output field.
//
// The two-time correlations C_i(tau) = <o_i(tau) a(0)>, with o_i running
// over the excitation-raising first-order operators (ad and the raising
// atomic coherences), obey the same equations of motion as the one-time
// means.  Pair moments appearing there split by the second-cumulant rule
// with the third leg a(0); the stationary one-time means freeze into
// coefficients, so the correlations obey a small linear system
//
//   dC/dtau = m C + b,   C(0) = c0  (equal-time steady moments).
//
// The generator conserves the excitation charge, which keeps the system
// closed over the raising sector and makes it independent of the rest of
// the moment hierarchy.  The spectrum is the one-sided transform of the
// output row, photon-flux normalized:
//
//   S(omega) = 2 kappa Re int_0^inf dtau e^{-i omega tau} <ad(tau) a(0)>,
//   int S(omega) domega / 2pi = kappa <ad a>_ss.
//
// Frequencies are offsets from the cavity rotating frame.  C(tau) is a sum
// of decaying exponentials (the eigenmodes of m), so S is evaluated in
// closed form on a grid that resolves every line; no windowing or
// truncation error enters.
//
// A finite observation span T replaces the transform bound with T, again in
// closed form.  That models a measurement (or a correlation integrated only
// to T): lines narrower than the span's resolution appear as the sinc-like
// window kernel of width 3.791/T rad/s, with its negative side lobes, so a
// windowed spectrum is a resolution object rather than a flux density; the
// flux sum rule is only advertised for the unwindowed form.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "raman/cumulant.hpp"
#include "raman/models.hpp"

namespace raman {

struct SpectraError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorrelationSystem {
  Eigen::MatrixXcd m;
  Eigen::VectorXcd b;   // constant drive, nonzero only when <a>_ss != 0
  Eigen::VectorXcd c0;  // equal-time values <o_i a>_ss
  std::vector<std::string> labels;
  int output_row = 0;  // <ad(tau) a(0)>
};

// Builds the correlation system around a steady state (real tape layout).
// Throws when a required moment is not tracked or a first-order equation
// fails to be linear in the moment variables.
CorrelationSystem derive_correlation_system(const CompiledSystem& sys,
                                            const Eigen::VectorXd& steady);

// One eigenmode of the output correlation:
//   <ad(tau) a(0)> = sum_m weight_m exp(lambda_m tau).
struct Mode {
  cplx lambda;
  cplx weight;
};

// Eigenmode decomposition of the output row, slowest decay first.  Throws
// when a mode carrying weight fails to decay (no stationary spectrum) or
// the generator is defective.  Empty when the output correlation vanishes.
std::vector<Mode> correlation_modes(const CorrelationSystem& cs);

struct SpectrumOptions {
  double corr_floor = 1e-4;  // horizon: slowest mode decayed to this fraction
  double resolve = 40.0;     // grid points per linewidth near each line
  double window = 150.0;     // half-span around each line, in linewidths
  int coarse = 2000;         // envelope samples spanning all lines
  double observation = 0.0;  // transform bound in seconds; 0 = unlimited
};

struct SpectrumResult {
  std::vector<double> omega;  // rad/s from the frame carrier, ascending
  std::vector<double> power;  // photon flux density; >= 0 up to mode interference
  std::vector<Mode> modes;
  double n_ss = 0.0;         // equal-time <ad a>, the flux sum-rule partner
  double horizon = 0.0;      // correlation span resolved by the slowest mode
  double observation = 0.0;  // transform bound actually applied; 0 = unlimited
};

SpectrumResult emission_spectrum(const CorrelationSystem& cs, double kappa,
                                 const SpectrumOptions& opts = {});

// Closed-form S on a caller-supplied grid, same normalization.
std::vector<double> spectrum_on_grid(const std::vector<Mode>& modes, double kappa,
                                     const std::vector<double>& omega);

// Transform truncated at `observation` seconds on a caller-supplied grid.
std::vector<double> windowed_spectrum_on_grid(const std::vector<Mode>& modes, double kappa,
                                              double observation,
                                              const std::vector<double>& omega);

// Model-free line read: peak position as the midpoint of the half-maximum
// crossings (zero baseline), width as their separation.  Works on any
// single-peaked curve, including window kernels a Lorentzian fit rejects.
struct LineMeasurement {
  double center = 0.0;  // rad/s
  double fwhm = 0.0;
  double height = 0.0;  // peak sample
};

// Throws when the curve is flat or nonpositive, the peak touches the grid
// edge, or a half crossing leaves the grid.
LineMeasurement measure_line(const std::vector<double>& omega,
                             const std::vector<double>& power);

struct LorentzianFit {
  double center = 0.0;  // rad/s
  double fwhm = 0.0;
  double height = 0.0;   // peak density above the pedestal
  double offset = 0.0;   // flat pedestal under the line
  double rms_rel = 0.0;  // window rms residual over the height
};

// Fits height * (fwhm/2)^2 / ((omega-center)^2 + (fwhm/2)^2) + offset to
// the dominant line.  Throws when the spectrum is flat, the peak touches
// the grid edge, a second line competes with the first, or the residual
// exceeds 5% of the height.
LorentzianFit fit_lorentzian(const std::vector<double>& omega,
                             const std::vector<double>& power);

// Dressed-level scale for the drive-induced displacement of the emission
// line, Omega^2 / (4 (wd - w32)).  Throws on a resonant drive.
double stark_shift_reference(const PhysicalParams& p);

}  // namespace raman
