#pragma once
// Exact Lindblad reference solver on the full Hilbert space
// Fock(cutoff) x (n_levels)^n_atoms.  Dense, for small systems only; serves
// as the correctness reference for the symbolic derivation and the
// mean-field engine.

#include <Eigen/Dense>
#include <vector>

#include "raman/opalgebra.hpp"

namespace raman {

using Matrix = Eigen::MatrixXcd;

struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SystemDims {
  int fock_dim = 2;  // photon cutoff + 1
  int n_atoms = 1;
  int n_levels = 3;

  int dim() const;
};

// Dense representation of a symbolic operator.  Register-summed factors
// expand over all atoms.  Coefficient phases evaluate at time t.
Matrix to_matrix(const OperatorExpr& expr, const SystemDims& dims, const ParamBindings& binds,
                 double t = 0.0);

struct LiouvillianSpec {
  OperatorExpr hamiltonian;  // units of rad/s (hbar absorbed)
  std::vector<std::pair<Coefficient, OperatorExpr>> channels;  // (rate, jump)
  SystemDims dims;
  ParamBindings binds;
};

// drho/dt = -i[H, rho] - sum_c rate_c * ( (c'c rho + rho c'c)/2 - c rho c' )
Matrix liouvillian_apply(const LiouvillianSpec& spec, const Matrix& rho, double t = 0.0);

struct DensityMatrix {
  double t = 0.0;
  Matrix rho;
};

struct ExactOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  int n_out = 200;
  // Evolution errors out if population of the top two Fock layers exceeds
  // this fraction at any output sample.
  double cutoff_leak_tol = 1e-8;
};

// Adaptive RK integration of the full master equation; returns n_out + 1
// uniformly spaced snapshots including both endpoints.  On a cutoff leak the
// photon cutoff is doubled (capped at 16) and the run retried once from t0;
// snapshots then carry the larger dimension.  A second leak throws.
std::vector<DensityMatrix> evolve_exact(const LiouvillianSpec& spec, const Matrix& rho0,
                                        double t0, double t1, const ExactOptions& opt = {});

// tr(rho * M) for each expression.
std::vector<cplx> moments(const Matrix& rho, const std::vector<OperatorExpr>& exprs,
                          const SystemDims& dims, const ParamBindings& binds, double t = 0.0);

// Convenience states.
Matrix vacuum_state(const SystemDims& dims, const std::vector<int>& atom_levels);
Matrix random_density(const SystemDims& dims, unsigned seed);

double fock_tail_population(const Matrix& rho, const SystemDims& dims);

}  // namespace raman
