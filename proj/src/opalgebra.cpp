#include "raman/opalgebra.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace raman {

// ---------------------------------------------------------------------------
// Symbol table

namespace {

struct SymbolTable {
  std::mutex mu;
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
};

SymbolTable& table() {
  static SymbolTable t;
  return t;
}

}  // namespace

int param_id(const std::string& name) {
  auto& t = table();
  std::lock_guard<std::mutex> lock(t.mu);
  auto it = t.ids.find(name);
  if (it != t.ids.end()) return it->second;
  int id = static_cast<int>(t.names.size());
  t.names.push_back(name);
  t.ids.emplace(name, id);
  return id;
}

const std::string& param_name(int id) {
  auto& t = table();
  std::lock_guard<std::mutex> lock(t.mu);
  if (id < 0 || id >= static_cast<int>(t.names.size()))
    throw AlgebraError("unknown parameter id " + std::to_string(id));
  return t.names[static_cast<std::size_t>(id)];
}

bool param_exists(const std::string& name) {
  auto& t = table();
  std::lock_guard<std::mutex> lock(t.mu);
  return t.ids.count(name) > 0;
}

// ---------------------------------------------------------------------------
// Elementary ops

ElementaryOp boson_create() { return {OpKind::create, 0, 0, 0}; }
ElementaryOp boson_annihilate() { return {OpKind::annihilate, 0, 0, 0}; }

ElementaryOp transition(int atom, int ket, int bra) {
  if (ket < 1 || bra < 1) throw AlgebraError("transition levels are 1-based");
  ElementaryOp op;
  op.kind = OpKind::transition;
  op.atom = static_cast<std::int16_t>(atom);
  op.ket = static_cast<std::int8_t>(ket);
  op.bra = static_cast<std::int8_t>(bra);
  return op;
}

ElementaryOp adjoint(const ElementaryOp& op) {
  ElementaryOp r = op;
  switch (op.kind) {
    case OpKind::create:
      r.kind = OpKind::annihilate;
      break;
    case OpKind::annihilate:
      r.kind = OpKind::create;
      break;
    case OpKind::transition:
      std::swap(r.ket, r.bra);
      break;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Coefficients

Coefficient coef_param(const std::string& name, cplx scale, bool conjugated) {
  Coefficient c(scale);
  c.params.emplace_back(param_id(name), conjugated);
  return c;
}

Coefficient operator*(const Coefficient& a, const Coefficient& b) {
  Coefficient r(a.value * b.value);
  r.params = a.params;
  r.params.insert(r.params.end(), b.params.begin(), b.params.end());
  std::sort(r.params.begin(), r.params.end());
  std::map<int, int> combo;
  for (const auto& [id, mult] : a.phase) combo[id] += mult;
  for (const auto& [id, mult] : b.phase) combo[id] += mult;
  for (const auto& [id, mult] : combo)
    if (mult != 0) r.phase.emplace_back(id, mult);
  return r;
}

Coefficient conj(const Coefficient& a) {
  Coefficient r(std::conj(a.value));
  r.params.reserve(a.params.size());
  for (const auto& [id, cj] : a.params) r.params.emplace_back(id, !cj);
  std::sort(r.params.begin(), r.params.end());
  r.phase.reserve(a.phase.size());
  for (const auto& [id, mult] : a.phase) r.phase.emplace_back(id, -mult);
  return r;
}

Coefficient with_phase(Coefficient c, const std::vector<std::pair<std::string, int>>& combo) {
  std::map<int, int> acc;
  for (const auto& [id, mult] : c.phase) acc[id] += mult;
  for (const auto& [name, mult] : combo) acc[param_id(name)] += mult;
  c.phase.clear();
  for (const auto& [id, mult] : acc)
    if (mult != 0) c.phase.emplace_back(id, mult);
  return c;
}

// ---------------------------------------------------------------------------
// Canonical normal ordering

namespace {

int rank(const ElementaryOp& op) { return static_cast<int>(op.kind); }

// Returns true when adjacent pair (x, y) is already in canonical order and
// needs no rewrite.
bool ordered(const ElementaryOp& x, const ElementaryOp& y) {
  if (x.kind == OpKind::transition && y.kind == OpKind::transition) {
    if (x.atom == y.atom) return false;  // must contract (or vanish)
    return x.atom < y.atom;
  }
  if (x.kind == OpKind::annihilate && y.kind == OpKind::create) return false;
  return rank(x) <= rank(y);
}

int count_summed(const OperatorTerm& t) {
  int n = 0;
  for (const auto& op : t.ops)
    if (op.kind == OpKind::transition && op.atom == kSummedAtom) ++n;
  return n;
}

struct TermKey {
  const OperatorTerm* t;
};

bool key_less(const OperatorTerm& a, const OperatorTerm& b) {
  if (a.ops != b.ops)
    return std::lexicographical_compare(a.ops.begin(), a.ops.end(), b.ops.begin(), b.ops.end());
  if (a.coef.params != b.coef.params) return a.coef.params < b.coef.params;
  return a.coef.phase < b.coef.phase;
}

bool key_equal(const OperatorTerm& a, const OperatorTerm& b) {
  return a.ops == b.ops && a.coef.params == b.coef.params && a.coef.phase == b.coef.phase;
}

}  // namespace

std::vector<OperatorTerm> canonicalize(std::vector<OperatorTerm> raw) {
  std::vector<OperatorTerm> done;
  std::vector<OperatorTerm> work = std::move(raw);
  while (!work.empty()) {
    OperatorTerm t = std::move(work.back());
    work.pop_back();
    if (t.coef.is_zero()) continue;
    if (count_summed(t) > 1)
      throw AlgebraError("product holds two register-summed factors; instantiate sums first");

    bool rewritten = false;
    for (std::size_t i = 0; i + 1 < t.ops.size(); ++i) {
      const ElementaryOp& x = t.ops[i];
      const ElementaryOp& y = t.ops[i + 1];
      if (ordered(x, y)) continue;

      if (x.kind == OpKind::annihilate && y.kind == OpKind::create) {
        // a ad = ad a + 1
        OperatorTerm swapped = t;
        std::swap(swapped.ops[i], swapped.ops[i + 1]);
        OperatorTerm contracted = t;
        contracted.ops.erase(contracted.ops.begin() + static_cast<std::ptrdiff_t>(i),
                             contracted.ops.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        work.push_back(std::move(swapped));
        work.push_back(std::move(contracted));
      } else if (x.kind == OpKind::transition && y.kind == OpKind::transition &&
                 x.atom == y.atom) {
        // |l><m| |l'><m'| = delta_{m,l'} |l><m'|
        if (x.bra != y.ket) {
          // zero term; drop
        } else {
          OperatorTerm contracted = t;
          contracted.ops[i] = transition(x.atom, x.ket, y.bra);
          contracted.ops.erase(contracted.ops.begin() + static_cast<std::ptrdiff_t>(i) + 1);
          work.push_back(std::move(contracted));
        }
      } else {
        // distinct subsystems commute
        OperatorTerm swapped = t;
        std::swap(swapped.ops[i], swapped.ops[i + 1]);
        work.push_back(std::move(swapped));
      }
      rewritten = true;
      break;
    }
    if (!rewritten) done.push_back(std::move(t));
  }

  std::sort(done.begin(), done.end(), key_less);
  std::vector<OperatorTerm> merged;
  for (auto& t : done) {
    if (!merged.empty() && key_equal(merged.back(), t))
      merged.back().coef.value += t.coef.value;
    else
      merged.push_back(std::move(t));
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const OperatorTerm& t) { return t.coef.is_zero(); }),
               merged.end());
  return merged;
}

// ---------------------------------------------------------------------------
// OperatorExpr

OperatorExpr::OperatorExpr(const OperatorTerm& t) : terms_(canonicalize({t})) {}
OperatorExpr::OperatorExpr(std::vector<OperatorTerm> terms) : terms_(canonicalize(std::move(terms))) {}

OperatorExpr OperatorExpr::identity(cplx scale) {
  OperatorTerm t;
  t.coef = Coefficient(scale);
  return OperatorExpr(t);
}

OperatorExpr OperatorExpr::single(const ElementaryOp& op, Coefficient c) {
  OperatorTerm t;
  t.coef = std::move(c);
  t.ops.push_back(op);
  return OperatorExpr(t);
}

bool OperatorExpr::has_phase() const {
  for (const auto& t : terms_)
    if (t.coef.has_phase()) return true;
  return false;
}

OperatorExpr operator+(const OperatorExpr& a, const OperatorExpr& b) {
  std::vector<OperatorTerm> all = a.terms_;
  all.insert(all.end(), b.terms_.begin(), b.terms_.end());
  return OperatorExpr(std::move(all));
}

OperatorExpr operator-(const OperatorExpr& a, const OperatorExpr& b) {
  return a + b.scaled(cplx(-1.0));
}

OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b) {
  std::vector<OperatorTerm> prod;
  prod.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& ta : a.terms_)
    for (const auto& tb : b.terms_) {
      OperatorTerm t;
      t.coef = ta.coef * tb.coef;
      t.ops = ta.ops;
      t.ops.insert(t.ops.end(), tb.ops.begin(), tb.ops.end());
      prod.push_back(std::move(t));
    }
  return OperatorExpr(std::move(prod));
}

OperatorExpr OperatorExpr::scaled(const Coefficient& c) const {
  std::vector<OperatorTerm> out = terms_;
  for (auto& t : out) t.coef = t.coef * c;
  return OperatorExpr(std::move(out));
}

bool operator==(const OperatorExpr& a, const OperatorExpr& b) {
  if (a.terms_.size() != b.terms_.size()) return false;
  for (std::size_t i = 0; i < a.terms_.size(); ++i) {
    const auto& ta = a.terms_[i];
    const auto& tb = b.terms_[i];
    if (!key_equal(ta, tb)) return false;
    if (std::abs(ta.coef.value - tb.coef.value) > 1e-14 * (1.0 + std::abs(ta.coef.value)))
      return false;
  }
  return true;
}

OperatorExpr adjoint(const OperatorExpr& x) {
  std::vector<OperatorTerm> out;
  out.reserve(x.terms().size());
  for (const auto& t : x.terms()) {
    OperatorTerm r;
    r.coef = conj(t.coef);
    r.ops.reserve(t.ops.size());
    for (auto it = t.ops.rbegin(); it != t.ops.rend(); ++it) r.ops.push_back(adjoint(*it));
    out.push_back(std::move(r));
  }
  return OperatorExpr(std::move(out));
}

OperatorExpr commutator(const OperatorExpr& a, const OperatorExpr& b) {
  return a * b - b * a;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string num_str(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string value_str(cplx v, bool has_factors) {
  if (v == cplx(1.0, 0.0)) return has_factors ? "" : "1";
  if (v == cplx(-1.0, 0.0)) return has_factors ? "-" : "-1";
  if (v == cplx(0.0, 1.0)) return has_factors ? "i*" : "i";
  if (v == cplx(0.0, -1.0)) return has_factors ? "-i*" : "-i";
  std::string s;
  if (v.imag() == 0.0)
    s = num_str(v.real());
  else if (v.real() == 0.0)
    s = num_str(v.imag()) + "i";
  else
    s = "(" + num_str(v.real()) + (v.imag() < 0 ? "" : "+") + num_str(v.imag()) + "i)";
  return has_factors ? s + "*" : s;
}

std::string phase_str(const std::vector<std::pair<int, int>>& combo) {
  std::string s = "exp(i*(";
  bool first = true;
  for (const auto& [id, mult] : combo) {
    std::string w = param_name(id);
    if (mult == 1)
      s += (first ? "" : "+") + w;
    else if (mult == -1)
      s += "-" + w;
    else if (mult > 0)
      s += (first ? "" : "+") + std::to_string(mult) + "*" + w;
    else
      s += "-" + std::to_string(-mult) + "*" + w;
    first = false;
  }
  s += ")*t)";
  return s;
}

std::string op_str(const ElementaryOp& op) {
  switch (op.kind) {
    case OpKind::create:
      return "ad";
    case OpKind::annihilate:
      return "a";
    case OpKind::transition: {
      std::string s = "s" + std::to_string(op.ket) + std::to_string(op.bra) + "[";
      s += (op.atom == kSummedAtom) ? "k" : std::to_string(op.atom);
      return s + "]";
    }
  }
  return "?";
}

}  // namespace

std::string term_str(const OperatorTerm& t) {
  std::vector<std::string> factors;
  for (const auto& [id, cj] : t.coef.params)
    factors.push_back(cj ? "conj(" + param_name(id) + ")" : param_name(id));
  if (t.coef.has_phase()) factors.push_back(phase_str(t.coef.phase));
  for (const auto& op : t.ops) factors.push_back(op_str(op));

  std::string s = value_str(t.coef.value, !factors.empty());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i > 0) s += "*";
    s += factors[i];
  }
  return s;
}

std::string OperatorExpr::str() const {
  if (terms_.empty()) return "0";
  std::string s;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    std::string t = term_str(terms_[i]);
    if (i == 0) {
      s = t;
    } else if (!t.empty() && t[0] == '-') {
      s += " - " + t.substr(1);
    } else {
      s += " + " + t;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Bindings

cplx ParamBindings::get(int id) const {
  auto it = values.find(id);
  if (it == values.end()) throw AlgebraError("unbound parameter: " + param_name(id));
  return it->second;
}

cplx ParamBindings::get(const std::string& name) const { return get(param_id(name)); }

cplx ParamBindings::eval(const Coefficient& c, double t) const {
  cplx v = c.value;
  for (const auto& [id, cj] : c.params) {
    cplx p = get(id);
    v *= cj ? std::conj(p) : p;
  }
  if (!c.phase.empty()) {
    double w = 0.0;
    for (const auto& [id, mult] : c.phase) w += mult * get(id).real();
    v *= std::exp(cplx(0.0, w * t));
  }
  return v;
}

}  // namespace raman
