#include "raman/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace raman {

namespace {

// Excitation charge: one unit per photon, one per atom outside the ground
// level.  Every Hamiltonian and jump term carries a definite charge, so the
// equation of a charge-q moment references charge-q moments only.
int level_weight(int level) { return level >= 2 ? 1 : 0; }

int op_charge(const ElementaryOp& op) {
  switch (op.kind) {
    case OpKind::create: return 1;
    case OpKind::annihilate: return -1;
    case OpKind::transition: return level_weight(op.ket) - level_weight(op.bra);
  }
  return 0;
}

cplx steady_mean(const CompiledSystem& sys, const Eigen::VectorXd& y, const ElementaryOp& op) {
  bool conj = false;
  const int var = sys.find_moment({op}, &conj);
  if (var < 0)
    throw SpectraError("steady mean " + moment_name({op}) + " is not a tracked moment");
  return sys.moment_value(y.data(), var, conj);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// int_0^T e^{(lambda - i omega) tau} dtau, stable as the exponent vanishes.
cplx truncated_kernel(cplx lambda, double omega, double observation) {
  const cplx z = lambda - cplx(0.0, omega);
  const cplx u = z * observation;
  if (std::abs(u) < 1e-4)
    return observation * (1.0 + u / 2.0 + u * u / 6.0);
  return (std::exp(u) - 1.0) / z;
}

// Half-maximum main-lobe width of sin(x)/x over x = (omega - center) T / 2.
constexpr double kWindowKernelFwhm = 3.7909885;

}  // namespace

CorrelationSystem derive_correlation_system(const CompiledSystem& sys,
                                            const Eigen::VectorXd& steady) {
  if (steady.size() != sys.n_real())
    throw SpectraError("steady-state vector does not match the tape layout");
  const MomentSystem& ms = sys.source();

  // Raising sector: the photon creator first (output row), then every
  // charge-raising atomic coherence of the single-atom representative.
  std::vector<ElementaryOp> row_ops{boson_create()};
  for (int ket = 1; ket <= ms.me.n_levels; ++ket)
    for (int bra = 1; bra <= ms.me.n_levels; ++bra)
      if (ket != bra && op_charge(transition(1, ket, bra)) == 1)
        row_ops.push_back(transition(1, ket, bra));

  struct Row {
    ElementaryOp op;
    int var;
    bool conj;
  };
  std::vector<Row> rows;
  for (const auto& op : row_ops) {
    bool conj = false;
    const int var = sys.find_moment({op}, &conj);
    if (var < 0)
      throw SpectraError("correlation row " + moment_name({op}) + " is not a tracked moment");
    rows.push_back({op, var, conj});
  }
  const int n = static_cast<int>(rows.size());

  const auto row_of = [&](const ElementaryOp& op) {
    for (int j = 0; j < n; ++j)
      if (rows[static_cast<std::size_t>(j)].op == op) return j;
    return -1;
  };

  CorrelationSystem out;
  out.m = Eigen::MatrixXcd::Zero(n, n);
  out.b = Eigen::VectorXcd::Zero(n);
  out.c0 = Eigen::VectorXcd::Zero(n);
  out.output_row = 0;

  const cplx mean_a = steady_mean(sys, steady, boson_annihilate());
  const ParamBindings& binds = sys.binds();

  for (int i = 0; i < n; ++i) {
    const Row& row = rows[static_cast<std::size_t>(i)];
    // <o_i> = conj(<rep>) when the row operator is the adjoint of the
    // stored representative; conjugate its equation term by term.
    for (const auto& term : ms.eqs[static_cast<std::size_t>(row.var)]) {
      cplx c = binds.eval(term.coef, 0.0);
      if (row.conj) c = std::conj(c);
      if (term.refs.empty()) {
        out.b(i) += c * mean_a;
        continue;
      }
      if (term.refs.size() != 1)
        throw SpectraError("first-order equation carries a product term; cannot regress");
      MomentRef ref = term.refs.front();
      if (row.conj) ref.conj = !ref.conj;
      const MomentKey& key = sys.keys()[static_cast<std::size_t>(ref.var)];
      if (key.size() == 1) {
        const ElementaryOp op = ref.conj ? adjoint(key[0]) : key[0];
        const int j = row_of(op);
        if (j < 0)
          throw SpectraError("correlation system is not closed over " + moment_name({op}));
        out.m(i, j) += c;
      } else if (key.size() == 2) {
        // Two-time second-cumulant split with the third leg a(0): the
        // stationary means act as coefficients, <o(tau) a(0)> of any
        // operator outside the raising sector vanishes by charge.
        const ElementaryOp f1 = ref.conj ? adjoint(key[0]) : key[0];
        const ElementaryOp f2 = ref.conj ? adjoint(key[1]) : key[1];
        const cplx pair = sys.moment_value(steady.data(), ref.var, ref.conj);
        const cplx m1 = steady_mean(sys, steady, f1);
        const cplx m2 = steady_mean(sys, steady, f2);
        const int j2 = row_of(f2);
        if (j2 >= 0) out.m(i, j2) += c * m1;
        const int j1 = row_of(f1);
        if (j1 >= 0) out.m(i, j1) += c * m2;
        out.b(i) += c * mean_a * (pair - 2.0 * m1 * m2);
      } else {
        throw SpectraError("closed equation references a third-order moment");
      }
    }

    bool conj = false;
    const int var = sys.find_moment({row.op, boson_annihilate()}, &conj);
    if (var < 0)
      throw SpectraError("equal-time moment of " + moment_name({row.op}) +
                         " with a is not tracked");
    out.c0(i) = sys.moment_value(steady.data(), var, conj);
    out.labels.push_back(moment_name({row.op}));
  }
  return out;
}

std::vector<Mode> correlation_modes(const CorrelationSystem& cs) {
  const Eigen::Index n = cs.m.rows();
  if (n == 0 || cs.m.cols() != n || cs.b.size() != n || cs.c0.size() != n)
    throw SpectraError("correlation system has inconsistent dimensions");

  Eigen::VectorXcd cinf = Eigen::VectorXcd::Zero(n);
  if (cs.b.cwiseAbs().maxCoeff() > 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(cs.m);
    if (!lu.isInvertible())
      throw SpectraError("correlation generator is singular with a constant drive");
    cinf = lu.solve(-cs.b);
  }
  const double scale = cs.c0.cwiseAbs().maxCoeff();
  if (std::abs(cinf(cs.output_row)) > 1e-9 * std::max(scale, 1e-300))
    throw SpectraError(
        "output correlation tends to a constant: a coherent line has no density here");

  const Eigen::VectorXcd dev = cs.c0 - cinf;
  if (dev.cwiseAbs().maxCoeff() == 0.0) return {};

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(cs.m);
  if (es.info() != Eigen::Success)
    throw SpectraError("eigendecomposition of the correlation generator failed");
  const Eigen::VectorXcd alpha = es.eigenvectors().colPivHouseholderQr().solve(dev);
  if ((es.eigenvectors() * alpha - dev).norm() > 1e-8 * dev.norm())
    throw SpectraError("correlation generator is defective; mode propagation is unreliable");

  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k)
    total += std::abs(es.eigenvectors()(cs.output_row, k) * alpha(k));

  std::vector<Mode> modes;
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx w = es.eigenvectors()(cs.output_row, k) * alpha(k);
    if (std::abs(w) <= 1e-12 * total) continue;
    const cplx lam = es.eigenvalues()(k);
    if (lam.real() >= 0.0)
      throw SpectraError("correlation mode at rate " + fmt(lam.real()) +
                         " does not decay; no stationary spectrum");
    modes.push_back({lam, w});
  }
  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    return std::abs(a.lambda.real()) < std::abs(b.lambda.real());
  });
  return modes;
}

std::vector<double> spectrum_on_grid(const std::vector<Mode>& modes, double kappa,
                                     const std::vector<double>& omega) {
  std::vector<double> s(omega.size(), 0.0);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    cplx acc(0.0, 0.0);
    for (const Mode& m : modes) acc += m.weight / (cplx(0.0, omega[i]) - m.lambda);
    s[i] = 2.0 * kappa * acc.real();
  }
  return s;
}

std::vector<double> windowed_spectrum_on_grid(const std::vector<Mode>& modes, double kappa,
                                              double observation,
                                              const std::vector<double>& omega) {
  if (!(observation > 0.0)) throw SpectraError("observation span must be positive");
  std::vector<double> s(omega.size(), 0.0);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    cplx acc(0.0, 0.0);
    for (const Mode& m : modes) acc += m.weight * truncated_kernel(m.lambda, omega[i], observation);
    s[i] = 2.0 * kappa * acc.real();
  }
  return s;
}

SpectrumResult emission_spectrum(const CorrelationSystem& cs, double kappa,
                                 const SpectrumOptions& opts) {
  if (kappa <= 0.0) throw SpectraError("photon flux normalization needs kappa > 0");
  if (!(opts.corr_floor > 0.0 && opts.corr_floor < 1.0) || opts.resolve < 4.0 ||
      opts.window < 4.0 || opts.coarse < 16 || opts.observation < 0.0)
    throw SpectraError("spectrum options out of range");

  SpectrumResult out;
  out.modes = correlation_modes(cs);
  out.n_ss = cs.c0(cs.output_row).real();
  if (out.modes.empty())
    throw SpectraError("output correlation vanishes; no spectrum to resolve");

  // A finite observation span floors every apparent width at the window
  // kernel's; the grid must resolve that kernel, ripples included.
  const double floor_width =
      opts.observation > 0.0 ? kWindowKernelFwhm / opts.observation : 0.0;
  const auto mode_width = [&](const Mode& m) {
    return std::max(2.0 * std::abs(m.lambda.real()), floor_width);
  };

  double slow = std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Mode& m : out.modes) {
    slow = std::min(slow, -m.lambda.real());
    const double width = mode_width(m);
    lo = std::min(lo, m.lambda.imag() - opts.window * width);
    hi = std::max(hi, m.lambda.imag() + opts.window * width);
  }
  out.horizon = std::log(1.0 / opts.corr_floor) / slow;
  if (opts.observation > 0.0) out.horizon = std::min(out.horizon, opts.observation);
  out.observation = opts.observation;

  std::vector<double> grid;
  for (int i = 0; i <= opts.coarse; ++i)
    grid.push_back(lo + (hi - lo) * i / opts.coarse);
  double finest = hi - lo;
  for (const Mode& m : out.modes) {
    const double width = mode_width(m);
    const double step = width / opts.resolve;
    finest = std::min(finest, step);
    const int half = static_cast<int>(std::lround(opts.window * opts.resolve));
    for (int j = -half; j <= half; ++j) grid.push_back(m.lambda.imag() + j * step);
    // geometric tail points out to the envelope: the 1/omega^2 wings would
    // otherwise be bridged linearly across the gap to the coarse grid and
    // wreck the integrated flux
    for (double x = opts.window * width; x <= hi - lo; x *= 1.25) {
      grid.push_back(m.lambda.imag() - x);
      grid.push_back(m.lambda.imag() + x);
    }
  }
  std::sort(grid.begin(), grid.end());
  const double merge = finest * 1e-6;
  out.omega.reserve(grid.size());
  for (double w : grid)
    if (out.omega.empty() || w - out.omega.back() > merge) out.omega.push_back(w);
  out.power = opts.observation > 0.0
                  ? windowed_spectrum_on_grid(out.modes, kappa, opts.observation, out.omega)
                  : spectrum_on_grid(out.modes, kappa, out.omega);
  return out;
}

LineMeasurement measure_line(const std::vector<double>& omega,
                             const std::vector<double>& power) {
  const std::size_t n = omega.size();
  if (n != power.size() || n < 8) throw SpectraError("spectrum too short to measure");

  std::size_t imax = 0;
  double pmax = -std::numeric_limits<double>::infinity();
  double pmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (power[i] > pmax) pmax = power[i], imax = i;
    pmin = std::min(pmin, power[i]);
  }
  if (!(pmax > 0.0) || pmax - pmin <= 1e-9 * std::abs(pmax))
    throw SpectraError("spectrum is flat; no line to measure");
  if (imax == 0 || imax == n - 1)
    throw SpectraError("spectral peak sits on the grid edge; widen the window");

  const double half = 0.5 * pmax;
  const auto cross = [&](int dir) {
    std::size_t i = imax;
    while (true) {
      const std::size_t next = i + static_cast<std::size_t>(dir);
      if (next >= n) throw SpectraError("line is not resolved inside the grid");
      if (power[next] <= half) {
        const double f = (power[i] - half) / (power[i] - power[next]);
        return omega[i] + f * (omega[next] - omega[i]);
      }
      i = next;
    }
  };
  const double wl = cross(-1);
  const double wr = cross(+1);

  LineMeasurement lm;
  lm.center = 0.5 * (wl + wr);
  lm.fwhm = wr - wl;
  lm.height = pmax;
  return lm;
}

LorentzianFit fit_lorentzian(const std::vector<double>& omega,
                             const std::vector<double>& power) {
  const std::size_t n = omega.size();
  if (n != power.size() || n < 8) throw SpectraError("spectrum too short to fit");

  std::size_t imax = 0;
  double pmax = -std::numeric_limits<double>::infinity();
  double pmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (power[i] > pmax) pmax = power[i], imax = i;
    pmin = std::min(pmin, power[i]);
  }
  if (!(pmax > 0.0) || pmax - pmin <= 1e-9 * std::abs(pmax))
    throw SpectraError("spectrum is flat; no line to fit");
  if (imax == 0 || imax == n - 1)
    throw SpectraError("spectral peak sits on the grid edge; widen the window");

  const double half = pmin + 0.5 * (pmax - pmin);
  const auto cross = [&](int dir) {
    std::size_t i = imax;
    while (true) {
      const std::size_t next = i + static_cast<std::size_t>(dir);
      if (next >= n) throw SpectraError("line is not resolved inside the grid");
      if (power[next] <= half) {
        const double f = (power[i] - half) / (power[i] - power[next]);
        return omega[i] + f * (omega[next] - omega[i]);
      }
      i = next;
    }
  };
  const double wl = cross(-1);
  const double wr = cross(+1);
  const double fwhm0 = wr - wl;
  const double center0 = 0.5 * (wl + wr);

  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (power[i] <= power[i - 1] || power[i] < power[i + 1]) continue;
    if (power[i] - pmin <= 0.5 * (pmax - pmin)) continue;
    if (std::abs(omega[i] - center0) > 3.0 * fwhm0)
      throw SpectraError("second spectral line competes with the first; fit is ambiguous");
  }

  std::vector<double> x, y;
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(omega[i] - center0) <= 8.0 * fwhm0) x.push_back(omega[i]), y.push_back(power[i]);
  const std::size_t m = x.size();
  if (m < 8) throw SpectraError("too few samples across the line to fit");

  // Levenberg-Marquardt on (height, center, half width, offset).
  Eigen::Vector4d p(pmax - pmin, center0, 0.5 * fwhm0, pmin);
  const auto chi2 = [&](const Eigen::Vector4d& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dq = x[i] - q(1);
      const double d2 = q(2) * q(2);
      const double r = q(3) + q(0) * d2 / (dq * dq + d2) - y[i];
      acc += r * r;
    }
    return acc;
  };
  double lambda = 1e-3;
  double best = chi2(p);
  for (int it = 0; it < 200; ++it) {
    Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
    Eigen::Vector4d g = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i < m; ++i) {
      const double dq = x[i] - p(1);
      const double d2 = p(2) * p(2);
      const double den = dq * dq + d2;
      const double u = d2 / den;
      const double r = p(3) + p(0) * u - y[i];
      Eigen::Vector4d j;
      j << u, p(0) * 2.0 * dq * d2 / (den * den), p(0) * 2.0 * p(2) * dq * dq / (den * den),
          1.0;
      h += j * j.transpose();
      g += j * r;
    }
    Eigen::Matrix4d damped = h;
    damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-300);
    const Eigen::Vector4d step = damped.ldlt().solve(-g);
    Eigen::Vector4d trial = p + step;
    trial(2) = std::abs(trial(2));
    const double c = chi2(trial);
    if (c < best) {
      const bool done = best - c < 1e-12 * best;
      p = trial;
      best = c;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (done) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }

  LorentzianFit fit;
  fit.height = p(0);
  fit.center = p(1);
  fit.fwhm = 2.0 * std::abs(p(2));
  fit.offset = p(3);
  fit.rms_rel = std::sqrt(best / static_cast<double>(m)) / std::abs(p(0));
  if (!(fit.height > 0.0) || !(fit.fwhm > 0.0) || fit.rms_rel > 0.05)
    throw SpectraError("line shape is not a single Lorentzian (rms residual " +
                       fmt(fit.rms_rel) + " of the height)");
  return fit;
}

double stark_shift_reference(const PhysicalParams& p) {
  const double delta = p.detuning();
  if (delta == 0.0) throw SpectraError("resonant drive has no dispersive line shift");
  return p.Omega * p.Omega / (4.0 * delta);
}

}  // namespace raman
