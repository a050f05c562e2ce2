#pragma once
// Derivation of mean-field moment equations from a master equation, closed
// at second cumulant order, reduced by permutation symmetry over the atom
// register, and compiled to a flat numeric tape for integration.
//
// Pipeline:
//   MasterEquation  --static_frame-->  time-independent MasterEquation
//                   --complete_moment_system-->  MomentSystem (symbolic)
//                   --bind_params-->  CompiledSystem (numeric tape)

#include <Eigen/Dense>

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "raman/opalgebra.hpp"

namespace raman {

struct DerivationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------

struct MasterEquation {
  OperatorExpr hamiltonian;  // rad/s, hbar absorbed
  struct Channel {
    Coefficient rate;   // must evaluate real and nonnegative
    OperatorExpr jump;  // a register-summed jump denotes one channel per atom
  };
  std::vector<Channel> channels;
  int n_levels = 3;

  // Parameters defined as linear combinations of other (frequency)
  // parameters, resolved when binding numbers; filled by static_frame.
  struct ParamDef {
    int param;
    std::vector<std::pair<int, double>> combo;
  };
  std::vector<ParamDef> defs;
};

// Moves to the rotating frame diagonal in photon number and atomic
// populations that cancels every explicit phase in the Hamiltonian.  The
// cavity frame is kept fixed (no photon-number shift) and level 1 is the
// energy reference.  Residual level shifts appear as diagonal terms with
// parameters "eta2", "eta3", ... defined from the drive frequencies.
// Throws DerivationError when no such frame exists.
MasterEquation static_frame(const MasterEquation& me);

// ---------------------------------------------------------------------------
// Moment bookkeeping.  A moment is identified by its canonical operator
// product: atoms relabeled 1..m in sorted transition order (permutation
// symmetry), then folded onto the lexicographically smaller of itself and
// its adjoint (<o>* = <o^dag>).

using MomentKey = std::vector<ElementaryOp>;

struct NormalizedMoment {
  MomentKey key;
  bool conjugated = false;  // true: requested moment is conj(key moment)
};

NormalizedMoment normalize_moment(const std::vector<ElementaryOp>& ops);
bool moment_self_conjugate(const MomentKey& key);
std::string moment_name(const MomentKey& key);
int moment_order(const MomentKey& key);

class MomentTable {
 public:
  // Normalizes and returns the variable index, allocating if new.
  int intern(const std::vector<ElementaryOp>& ops, bool* conjugated);
  // -1 when the normalized moment is not present.
  int find(const std::vector<ElementaryOp>& ops, bool* conjugated) const;
  const std::vector<MomentKey>& keys() const { return keys_; }
  std::size_t size() const { return keys_.size(); }

 private:
  std::vector<MomentKey> keys_;
  std::map<MomentKey, int> index_;
};

// ---------------------------------------------------------------------------
// Derivation

enum class AtomSum {
  symmetric,  // register sums -> terms over the observable's atoms plus one
              // fresh atom weighted by a symbolic multiplicity (N, N-1, N-2)
  concrete,   // register sums -> explicit sum over atoms 1..n_concrete
};

// Right-hand side of d<obs>/dt as an operator expression (expectation
// implied):  i<[H, obs]> + sum_channels rate * (<c^dag obs c>
// - <c^dag c obs>/2 - <obs c^dag c>/2).
OperatorExpr derive_moment_eq(const MasterEquation& me, const std::vector<ElementaryOp>& obs,
                              AtomSum mode, int n_concrete = 0);

// References a moment variable, possibly conjugated.
struct MomentRef {
  int var;
  bool conj;
  friend bool operator<(const MomentRef& a, const MomentRef& b) {
    return std::tie(a.var, a.conj) < std::tie(b.var, b.conj);
  }
  friend bool operator==(const MomentRef& a, const MomentRef& b) {
    return a.var == b.var && a.conj == b.conj;
  }
};

// One product of moment variables with a symbolic coefficient.
struct ClosedTerm {
  Coefficient coef;
  std::vector<MomentRef> refs;  // empty product = 1
};

// Expectation of one canonical operator product in terms of moments of
// order <= 2.  Order 3 splits by the second-cumulant rule
//   <XYZ> = <X><YZ> + <Y><XZ> + <Z><XY> - 2<X><Y><Z>,
// each factor keeping its normal-ordered position.  Order > 3 throws.
std::vector<ClosedTerm> cumulant_close(const OperatorTerm& term, MomentTable& table);

// ---------------------------------------------------------------------------

struct MomentSystem {
  MasterEquation me;
  MomentTable table;
  std::vector<bool> self_conj;
  std::vector<std::vector<ClosedTerm>> eqs;  // d var_i / dt

  std::string describe() const;
};

// Seeds the table with the requested moments, derives each variable's
// equation, closes it, and repeats until no new moments appear.  Symmetric
// reduction throughout.  Throws when the closure needs more than
// `max_vars` moments.
MomentSystem complete_moment_system(const MasterEquation& me,
                                    const std::vector<MomentKey>& seeds, int max_vars = 200);

// ---------------------------------------------------------------------------
// Numeric tape.  Real layout: one slot for self-conjugate moments, (re, im)
// for the rest, in variable order.

class CompiledSystem {
 public:
  struct Factor {
    int var;
    bool conj;
  };
  struct Term {
    cplx c;
    int n = 0;
    Factor f[3];
  };

  int n_vars() const { return static_cast<int>(keys_.size()); }
  int n_real() const { return n_real_; }
  const std::vector<MomentKey>& keys() const { return keys_; }
  const std::vector<bool>& self_conj() const { return self_conj_; }
  int offset(int var) const { return offsets_[static_cast<std::size_t>(var)]; }
  const ParamBindings& binds() const { return binds_; }
  const MomentSystem& source() const { return *source_; }

  // dy/dt = f(y); not thread safe (shared scratch).
  void eval(const double* y, double* dy) const;
  // Analytic Jacobian of eval in the real layout.
  void jacobian(const double* y, Eigen::MatrixXd& jac) const;

  std::vector<cplx> unpack(const double* y) const;
  void pack(const std::vector<cplx>& z, double* y) const;
  cplx moment_value(const double* y, int var, bool conjugated = false) const;

  int find_moment(const std::vector<ElementaryOp>& ops, bool* conjugated) const;

  // max |c| (and max |Re c|) over linear self-coupling terms; stiffness and
  // relaxation scales for step-size and steady-state heuristics.
  double diag_rate_scale() const { return diag_rate_scale_; }
  double decay_rate_scale() const { return decay_rate_scale_; }

  std::string describe_layout() const;

  friend std::shared_ptr<const CompiledSystem> bind_params(
      std::shared_ptr<const MomentSystem> sys, const ParamBindings& binds);

 private:
  std::vector<MomentKey> keys_;
  std::vector<bool> self_conj_;
  std::vector<int> offsets_;
  int n_real_ = 0;
  std::vector<std::vector<Term>> eqs_;
  ParamBindings binds_;
  std::shared_ptr<const MomentSystem> source_;
  double diag_rate_scale_ = 0.0;
  double decay_rate_scale_ = 0.0;

  mutable std::vector<cplx> z_, dz_;
};

// Resolves frame definitions and register weights ("Nm1" = N-1, "Nm2" =
// N-2 when "N" is bound), evaluates every coefficient, and freezes the
// equations into a tape.  Throws if any coefficient still carries an
// explicit phase (apply static_frame first) or a parameter is unbound.
std::shared_ptr<const CompiledSystem> bind_params(std::shared_ptr<const MomentSystem> sys,
                                                  const ParamBindings& binds);

}  // namespace raman
