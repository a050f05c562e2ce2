#pragma once
// Symbolic operator algebra for one bosonic cavity mode coupled to a
// register of identical few-level atoms.
//
// Conventions:
//   * sigma^{lm} = |l><m| on a single atom, levels 1-based.
//   * canonical product order: cavity creators, cavity annihilators, then
//     atomic transitions sorted by atom index.  After canonicalization a
//     term holds at most one transition per atom (same-atom products
//     contract through |l><m| |l'><m'| = delta_{ml'} |l><m'|).
//   * bosonic reordering uses a ad = ad a + 1.
//   * a coefficient is (complex scalar) * (product of named parameters,
//     each optionally conjugated) * exp(i * (sum_j c_j w_j) * t) with the
//     w_j named frequency symbols and c_j integers.
//
// Expressions are value types; every operation returns a new canonical
// expression, and canonicalization is idempotent.

#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace raman {

using cplx = std::complex<double>;

struct AlgebraError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Interned symbol names for parameters and frequencies.  Ids are assigned in
// registration order and are stable for the lifetime of the process.

int param_id(const std::string& name);
const std::string& param_name(int id);
bool param_exists(const std::string& name);

// ---------------------------------------------------------------------------

enum class OpKind : std::uint8_t { create = 0, annihilate = 1, transition = 2 };

// Atom index used by a transition factor inside a sum over the register.
// Instantiation (cumulant layer) replaces it by concrete indices.
inline constexpr int kSummedAtom = 0;

struct ElementaryOp {
  OpKind kind = OpKind::annihilate;
  std::int16_t atom = 0;  // transitions only; concrete indices are 1-based
  std::int8_t ket = 0;    // |ket><bra|
  std::int8_t bra = 0;

  friend bool operator==(const ElementaryOp& a, const ElementaryOp& b) {
    return a.kind == b.kind && a.atom == b.atom && a.ket == b.ket && a.bra == b.bra;
  }
  friend bool operator<(const ElementaryOp& a, const ElementaryOp& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.atom != b.atom) return a.atom < b.atom;
    if (a.ket != b.ket) return a.ket < b.ket;
    return a.bra < b.bra;
  }
};

ElementaryOp boson_create();
ElementaryOp boson_annihilate();
ElementaryOp transition(int atom, int ket, int bra);
ElementaryOp adjoint(const ElementaryOp& op);

// ---------------------------------------------------------------------------

struct Coefficient {
  cplx value{1.0, 0.0};
  std::vector<std::pair<int, bool>> params;  // (param id, conjugated), sorted
  std::vector<std::pair<int, int>> phase;    // (freq id, integer multiple), sorted, no zeros

  Coefficient() = default;
  explicit Coefficient(cplx v) : value(v) {}
  Coefficient(cplx v, std::vector<std::pair<int, bool>> p) : value(v), params(std::move(p)) {}

  bool is_zero() const { return value == cplx(0.0, 0.0); }
  bool has_phase() const { return !phase.empty(); }
};

Coefficient coef_param(const std::string& name, cplx scale = 1.0, bool conjugated = false);
Coefficient operator*(const Coefficient& a, const Coefficient& b);
Coefficient conj(const Coefficient& a);

// Attach exp(i * (sum c_j w_j) * t); merges with any existing phase.
Coefficient with_phase(Coefficient c, const std::vector<std::pair<std::string, int>>& combo);

// ---------------------------------------------------------------------------

struct OperatorTerm {
  Coefficient coef;
  std::vector<ElementaryOp> ops;  // identity when empty
};

class OperatorExpr {
 public:
  OperatorExpr() = default;                       // zero
  OperatorExpr(const OperatorTerm& t);            // canonicalizes
  OperatorExpr(std::vector<OperatorTerm> terms);  // canonicalizes

  static OperatorExpr zero() { return OperatorExpr(); }
  static OperatorExpr identity(cplx scale = 1.0);
  static OperatorExpr single(const ElementaryOp& op, Coefficient c = Coefficient(cplx(1.0)));

  const std::vector<OperatorTerm>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool has_phase() const;

  friend OperatorExpr operator+(const OperatorExpr& a, const OperatorExpr& b);
  friend OperatorExpr operator-(const OperatorExpr& a, const OperatorExpr& b);
  friend OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b);
  OperatorExpr scaled(const Coefficient& c) const;
  OperatorExpr scaled(cplx c) const { return scaled(Coefficient(c)); }

  friend bool operator==(const OperatorExpr& a, const OperatorExpr& b);

  std::string str() const;  // debug rendering, e.g. "g31*exp(i*(wc-w31)*t)*ad*s13[1]"

 private:
  std::vector<OperatorTerm> terms_;  // canonical: normal ordered, sorted, merged
};

OperatorExpr adjoint(const OperatorExpr& x);
OperatorExpr commutator(const OperatorExpr& a, const OperatorExpr& b);

// Canonical normal ordering of raw terms: used by the constructors, exposed
// for tests.  Throws AlgebraError if two summed-atom factors meet in one
// product (nested register sums are not representable).
std::vector<OperatorTerm> canonicalize(std::vector<OperatorTerm> raw);

std::string term_str(const OperatorTerm& t);

// ---------------------------------------------------------------------------
// Numeric parameter bindings (complex-valued; frequencies use the real part).

struct ParamBindings {
  std::map<int, cplx> values;

  void set(const std::string& name, cplx v) { values[param_id(name)] = v; }
  bool has(const std::string& name) const { return values.count(param_id(name)) > 0; }
  cplx get(const std::string& name) const;
  cplx get(int id) const;
  double real(const std::string& name) const { return get(name).real(); }

  // coefficient value * product of bound parameters * exp(i*(combo)*t)
  cplx eval(const Coefficient& c, double t = 0.0) const;
};

}  // namespace raman
