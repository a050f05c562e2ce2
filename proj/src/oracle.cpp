#include "raman/oracle.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <random>

namespace raman {

int SystemDims::dim() const {
  int d = fock_dim;
  for (int k = 0; k < n_atoms; ++k) d *= n_levels;
  return d;
}

namespace {

Matrix fock_annihilate(int fock_dim) {
  Matrix a = Matrix::Zero(fock_dim, fock_dim);
  for (int n = 1; n < fock_dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Matrix atom_identity(int n) { return Matrix::Identity(n, n); }

// Full-space matrix of one elementary factor; `atom_override` substitutes a
// concrete index for a register-summed transition.
Matrix op_matrix(const ElementaryOp& op, const SystemDims& dims, int atom_override) {
  const int L = dims.n_levels;
  if (op.kind == OpKind::create || op.kind == OpKind::annihilate) {
    Matrix b = fock_annihilate(dims.fock_dim);
    if (op.kind == OpKind::create) b = b.adjoint().eval();
    Matrix full = b;
    for (int k = 0; k < dims.n_atoms; ++k)
      full = Eigen::kroneckerProduct(full, atom_identity(L)).eval();
    return full;
  }
  const int atom = (op.atom == kSummedAtom) ? atom_override : op.atom;
  if (atom < 1 || atom > dims.n_atoms)
    throw OracleError("transition atom index out of range");
  if (op.ket > L || op.bra > L) throw OracleError("transition level exceeds n_levels");
  Matrix e = Matrix::Zero(L, L);
  e(op.ket - 1, op.bra - 1) = 1.0;
  Matrix full = Matrix::Identity(dims.fock_dim, dims.fock_dim);
  for (int k = 1; k <= dims.n_atoms; ++k)
    full = Eigen::kroneckerProduct(full, (k == atom) ? e : atom_identity(L)).eval();
  return full;
}

Matrix term_matrix(const OperatorTerm& term, const SystemDims& dims, const ParamBindings& binds,
                   double t) {
  const int d = dims.dim();
  cplx c = binds.eval(term.coef, t);

  int summed_pos = -1;
  for (std::size_t i = 0; i < term.ops.size(); ++i)
    if (term.ops[i].kind == OpKind::transition && term.ops[i].atom == kSummedAtom)
      summed_pos = static_cast<int>(i);

  auto product_for = [&](int atom_override) {
    Matrix m = Matrix::Identity(d, d);
    for (const auto& op : term.ops) m = (m * op_matrix(op, dims, atom_override)).eval();
    return m;
  };

  if (summed_pos < 0) return c * product_for(0);
  Matrix acc = Matrix::Zero(d, d);
  for (int k = 1; k <= dims.n_atoms; ++k) acc += product_for(k);
  return c * acc;
}

}  // namespace

Matrix to_matrix(const OperatorExpr& expr, const SystemDims& dims, const ParamBindings& binds,
                 double t) {
  const int d = dims.dim();
  Matrix m = Matrix::Zero(d, d);
  for (const auto& term : expr.terms()) m += term_matrix(term, dims, binds, t);
  return m;
}

namespace {

double channel_rate(const Coefficient& rate, const ParamBindings& binds) {
  cplx r = binds.eval(rate, 0.0);
  if (std::abs(r.imag()) > 1e-12 * (1.0 + std::abs(r)))
    throw OracleError("dissipation rate is not real");
  if (r.real() < 0.0) throw OracleError("dissipation rate is negative");
  return r.real();
}

struct PreparedLiouvillian {
  // H(t) = sum_j exp(i w_j t) * m_j
  std::vector<std::pair<double, Matrix>> hterms;
  struct Ch {
    double rate;
    Matrix c, cdag, cdc;
  };
  std::vector<Ch> channels;

  explicit PreparedLiouvillian(const LiouvillianSpec& spec) {
    for (const auto& term : spec.hamiltonian.terms()) {
      double w = 0.0;
      for (const auto& [id, mult] : term.coef.phase) w += mult * spec.binds.get(id).real();
      OperatorTerm stripped = term;
      stripped.coef.phase.clear();
      hterms.emplace_back(w, term_matrix(stripped, spec.dims, spec.binds, 0.0));
    }
    for (const auto& [rate, jump] : spec.channels) {
      if (jump.has_phase()) throw OracleError("jump operators must be phase-free");
      Ch ch;
      ch.rate = channel_rate(rate, spec.binds);
      ch.c = to_matrix(jump, spec.dims, spec.binds, 0.0);
      ch.cdag = ch.c.adjoint();
      ch.cdc = ch.cdag * ch.c;
      channels.push_back(std::move(ch));
    }
  }

  Matrix hamiltonian(double t) const {
    if (hterms.empty()) return Matrix();
    Matrix h = Matrix::Zero(hterms[0].second.rows(), hterms[0].second.cols());
    for (const auto& [w, m] : hterms)
      h += (w == 0.0) ? m : (std::exp(cplx(0.0, w * t)) * m).eval();
    return h;
  }

  Matrix apply(const Matrix& rho, double t) const {
    Matrix d = Matrix::Zero(rho.rows(), rho.cols());
    if (!hterms.empty()) {
      Matrix h = hamiltonian(t);
      d = cplx(0.0, -1.0) * (h * rho - rho * h);
    }
    for (const auto& ch : channels)
      d -= ch.rate * (0.5 * (ch.cdc * rho + rho * ch.cdc) - ch.c * rho * ch.cdag);
    return d;
  }
};

}  // namespace

Matrix liouvillian_apply(const LiouvillianSpec& spec, const Matrix& rho, double t) {
  PreparedLiouvillian prep(spec);
  return prep.apply(rho, t);
}

double fock_tail_population(const Matrix& rho, const SystemDims& dims) {
  const int L = dims.n_levels;
  int atoms_dim = 1;
  for (int k = 0; k < dims.n_atoms; ++k) atoms_dim *= L;
  double tail = 0.0;
  for (int n = std::max(0, dims.fock_dim - 2); n < dims.fock_dim; ++n)
    for (int j = 0; j < atoms_dim; ++j) tail += rho(n * atoms_dim + j, n * atoms_dim + j).real();
  return tail;
}

namespace {

// Dormand-Prince 5(4) step on a density matrix.
struct Dopri5Matrix {
  const PreparedLiouvillian& prep;
  double rtol, atol;

  Matrix k1, k2, k3, k4, k5, k6, k7;

  Dopri5Matrix(const PreparedLiouvillian& p, double rt, double at) : prep(p), rtol(rt), atol(at) {}

  // Returns error norm; fills ynew and k7 (FSAL).
  double step(const Matrix& y, double t, double h, Matrix& ynew) {
    k2 = prep.apply(y + h * (1.0 / 5) * k1, t + h / 5);
    k3 = prep.apply(y + h * ((3.0 / 40) * k1 + (9.0 / 40) * k2), t + 3 * h / 10);
    k4 = prep.apply(y + h * ((44.0 / 45) * k1 - (56.0 / 15) * k2 + (32.0 / 9) * k3),
                    t + 4 * h / 5);
    k5 = prep.apply(y + h * ((19372.0 / 6561) * k1 - (25360.0 / 2187) * k2 +
                             (64448.0 / 6561) * k3 - (212.0 / 729) * k4),
                    t + 8 * h / 9);
    k6 = prep.apply(y + h * ((9017.0 / 3168) * k1 - (355.0 / 33) * k2 + (46732.0 / 5247) * k3 +
                             (49.0 / 176) * k4 - (5103.0 / 18656) * k5),
                    t + h);
    ynew = y + h * ((35.0 / 384) * k1 + (500.0 / 1113) * k3 + (125.0 / 192) * k4 -
                    (2187.0 / 6784) * k5 + (11.0 / 84) * k6);
    k7 = prep.apply(ynew, t + h);
    Matrix err = h * ((71.0 / 57600) * k1 - (71.0 / 16695) * k3 + (71.0 / 1920) * k4 -
                      (17253.0 / 339200) * k5 + (22.0 / 525) * k6 - (1.0 / 40) * k7);
    double acc = 0.0;
    const auto* ye = ynew.data();
    const auto* y0 = y.data();
    const auto* ee = err.data();
    const auto n = ynew.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(ye[i]));
      double r = std::abs(ee[i]) / sc;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(n));
  }

  // Integrates y from t0 to t1 in place.
  void advance(Matrix& y, double t0, double t1) {
    double t = t0;
    double h = (t1 - t0) * 1e-3;
    k1 = prep.apply(y, t);
    Matrix ynew;
    int rejects_in_a_row = 0;
    while (t < t1) {
      if (t + h > t1) h = t1 - t;
      double err = step(y, t, h, ynew);
      if (err <= 1.0) {
        t += h;
        y.swap(ynew);
        k1.swap(k7);
        rejects_in_a_row = 0;
      } else {
        ++rejects_in_a_row;
        if (rejects_in_a_row > 60) throw OracleError("step size underflow in exact evolution");
      }
      double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
      h *= std::min(5.0, std::max(0.2, fac));
      if (!(h > 0.0) || t + h == t) throw OracleError("step size underflow in exact evolution");
    }
  }
};

}  // namespace

namespace {

struct CutoffLeak : OracleError {
  using OracleError::OracleError;
};

std::vector<DensityMatrix> evolve_once(const LiouvillianSpec& spec, const Matrix& rho0,
                                       double t0, double t1, const ExactOptions& opt) {
  PreparedLiouvillian prep(spec);
  Dopri5Matrix stepper(prep, opt.rtol, opt.atol);

  auto check_leak = [&](const Matrix& rho) {
    double leak = fock_tail_population(rho, spec.dims);
    if (leak > opt.cutoff_leak_tol)
      throw CutoffLeak("photon cutoff too small: top Fock layers hold " + std::to_string(leak));
  };

  std::vector<DensityMatrix> out;
  out.reserve(static_cast<std::size_t>(opt.n_out) + 1);
  Matrix rho = rho0;
  check_leak(rho);
  out.push_back({t0, rho});

  stepper.k1 = prep.apply(rho, t0);
  double t = t0;
  const double dt = (t1 - t0) / opt.n_out;
  for (int i = 1; i <= opt.n_out; ++i) {
    double target = (i == opt.n_out) ? t1 : t0 + i * dt;
    stepper.advance(rho, t, target);
    t = target;
    check_leak(rho);
    out.push_back({t, rho});
  }
  return out;
}

}  // namespace

std::vector<DensityMatrix> evolve_exact(const LiouvillianSpec& spec, const Matrix& rho0,
                                        double t0, double t1, const ExactOptions& opt) {
  if (rho0.rows() != spec.dims.dim() || rho0.cols() != spec.dims.dim())
    throw OracleError("initial state dimension mismatch");
  if (!(t1 > t0)) throw OracleError("evolution interval is empty");
  if (spec.dims.n_atoms > 3) throw OracleError("exact solver handles at most 3 atoms");
  if (spec.dims.fock_dim > 16) throw OracleError("exact solver handles photon cutoffs up to 16");

  try {
    return evolve_once(spec, rho0, t0, t1, opt);
  } catch (const CutoffLeak&) {
    // Raise the cutoff once and retry from the initial state; a second leak
    // is a genuine failure.
    int raised = std::min(2 * spec.dims.fock_dim, 16);
    if (raised <= spec.dims.fock_dim) throw;
    LiouvillianSpec grown = spec;
    grown.dims.fock_dim = raised;
    Matrix rho = Matrix::Zero(grown.dims.dim(), grown.dims.dim());
    rho.topLeftCorner(rho0.rows(), rho0.cols()) = rho0;  // Fock is the outer factor
    return evolve_once(grown, rho, t0, t1, opt);
  }
}

std::vector<cplx> moments(const Matrix& rho, const std::vector<OperatorExpr>& exprs,
                          const SystemDims& dims, const ParamBindings& binds, double t) {
  std::vector<cplx> vals;
  vals.reserve(exprs.size());
  for (const auto& e : exprs) vals.push_back((rho * to_matrix(e, dims, binds, t)).trace());
  return vals;
}

Matrix vacuum_state(const SystemDims& dims, const std::vector<int>& atom_levels) {
  if (static_cast<int>(atom_levels.size()) != dims.n_atoms)
    throw OracleError("need one level per atom");
  int idx = 0;  // Fock index 0
  for (int k = 0; k < dims.n_atoms; ++k) {
    int l = atom_levels[static_cast<std::size_t>(k)];
    if (l < 1 || l > dims.n_levels) throw OracleError("atom level out of range");
    idx = idx * dims.n_levels + (l - 1);
  }
  Matrix rho = Matrix::Zero(dims.dim(), dims.dim());
  rho(idx, idx) = 1.0;
  return rho;
}

Matrix random_density(const SystemDims& dims, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int d = dims.dim();
  Matrix g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = cplx(gauss(rng), gauss(rng));
  Matrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return rho;
}

}  // namespace raman
