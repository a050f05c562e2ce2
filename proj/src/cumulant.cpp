#include "raman/cumulant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace raman {

// ---------------------------------------------------------------------------
// Static frame

namespace {

using Combo = std::map<int, double>;  // freq param id -> coefficient

void combo_axpy(Combo& y, double a, const Combo& x) {
  for (const auto& [id, v] : x) {
    double nv = y[id] + a * v;
    if (std::abs(nv) < 1e-12)
      y.erase(id);
    else
      y[id] = nv;
  }
}

Combo phase_combo(const Coefficient& c) {
  Combo out;
  for (const auto& [id, mult] : c.phase) out[id] = static_cast<double>(mult);
  return out;
}

}  // namespace

MasterEquation static_frame(const MasterEquation& me) {
  if (!me.hamiltonian.has_phase()) return me;  // already static
  const int L = me.n_levels;
  // Unknowns eta_2..eta_L (eta_1 = 0, cavity frame fixed).  One linear row
  // per Hamiltonian term:  sum_transitions (eta_ket - eta_bra) = phase.
  struct Row {
    std::vector<double> lhs;  // index 0 <-> eta_2
    Combo rhs;
  };
  std::vector<Row> rows;
  for (const auto& term : me.hamiltonian.terms()) {
    Row r;
    r.lhs.assign(static_cast<std::size_t>(L - 1), 0.0);
    for (const auto& op : term.ops) {
      if (op.kind != OpKind::transition) continue;
      if (op.ket >= 2) r.lhs[static_cast<std::size_t>(op.ket - 2)] += 1.0;
      if (op.bra >= 2) r.lhs[static_cast<std::size_t>(op.bra - 2)] -= 1.0;
    }
    r.rhs = phase_combo(term.coef);
    bool trivial = r.rhs.empty();
    for (double v : r.lhs) trivial = trivial && v == 0.0;
    if (!trivial) rows.push_back(std::move(r));
  }

  // Gaussian elimination with combo-valued right-hand sides.
  std::vector<Combo> eta(static_cast<std::size_t>(L - 1));
  std::vector<int> pivot_row(static_cast<std::size_t>(L - 1), -1);
  int next_row = 0;
  for (int col = 0; col < L - 1; ++col) {
    int pr = -1;
    for (int i = next_row; i < static_cast<int>(rows.size()); ++i)
      if (std::abs(rows[static_cast<std::size_t>(i)].lhs[static_cast<std::size_t>(col)]) > 1e-9) {
        pr = i;
        break;
      }
    if (pr < 0) continue;
    std::swap(rows[static_cast<std::size_t>(pr)], rows[static_cast<std::size_t>(next_row)]);
    Row& p = rows[static_cast<std::size_t>(next_row)];
    double pv = p.lhs[static_cast<std::size_t>(col)];
    for (auto& v : p.lhs) v /= pv;
    for (auto& [id, v] : p.rhs) v /= pv;
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
      if (i == next_row) continue;
      Row& r = rows[static_cast<std::size_t>(i)];
      double f = r.lhs[static_cast<std::size_t>(col)];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < r.lhs.size(); ++j) r.lhs[j] -= f * p.lhs[j];
      combo_axpy(r.rhs, -f, p.rhs);
    }
    pivot_row[static_cast<std::size_t>(col)] = next_row;
    ++next_row;
  }
  // Consistency: rows with empty lhs must have empty rhs.
  for (int i = next_row; i < static_cast<int>(rows.size()); ++i) {
    for (const auto& [id, v] : rows[static_cast<std::size_t>(i)].rhs)
      if (std::abs(v) > 1e-9)
        throw DerivationError("no static frame cancels every drive phase");
  }
  for (int col = 0; col < L - 1; ++col)
    if (pivot_row[static_cast<std::size_t>(col)] >= 0)
      eta[static_cast<std::size_t>(col)] =
          rows[static_cast<std::size_t>(pivot_row[static_cast<std::size_t>(col)])].rhs;

  // Rebuild: strip phases (verified to cancel), add residual level shifts.
  MasterEquation out = me;
  std::vector<OperatorTerm> terms;
  for (const auto& term : me.hamiltonian.terms()) {
    Combo residual = phase_combo(term.coef);
    for (const auto& op : term.ops) {
      if (op.kind != OpKind::transition) continue;
      if (op.ket >= 2) combo_axpy(residual, -1.0, eta[static_cast<std::size_t>(op.ket - 2)]);
      if (op.bra >= 2) combo_axpy(residual, 1.0, eta[static_cast<std::size_t>(op.bra - 2)]);
    }
    for (const auto& [id, v] : residual)
      if (std::abs(v) > 1e-9) throw DerivationError("drive phase fails to cancel");
    OperatorTerm t = term;
    t.coef.phase.clear();
    terms.push_back(std::move(t));
  }
  for (int l = 2; l <= L; ++l) {
    const Combo& combo = eta[static_cast<std::size_t>(l - 2)];
    if (combo.empty()) continue;
    std::string name = "eta" + std::to_string(l);
    OperatorTerm t;
    t.coef = coef_param(name);
    t.ops.push_back(transition(kSummedAtom, l, l));
    terms.push_back(std::move(t));
    MasterEquation::ParamDef def;
    def.param = param_id(name);
    for (const auto& [id, v] : combo) def.combo.emplace_back(id, v);
    out.defs.push_back(std::move(def));
  }
  out.hamiltonian = OperatorExpr(std::move(terms));
  return out;
}

// ---------------------------------------------------------------------------
// Moment normalization

namespace {

// Relabels concrete atoms 1..m in sorted (ket, bra) order; assumes at most
// one transition per atom (canonical product).
MomentKey relabel_atoms(const MomentKey& ops) {
  std::vector<std::pair<std::pair<int, int>, int>> sigs;  // ((ket,bra), old atom)
  MomentKey cavity;
  for (const auto& op : ops) {
    if (op.kind == OpKind::transition)
      sigs.push_back({{op.ket, op.bra}, op.atom});
    else
      cavity.push_back(op);
  }
  std::sort(sigs.begin(), sigs.end());
  MomentKey out = cavity;
  for (std::size_t i = 0; i < sigs.size(); ++i)
    out.push_back(transition(static_cast<int>(i) + 1, sigs[i].first.first, sigs[i].first.second));
  return out;
}

MomentKey adjoint_key(const MomentKey& ops) {
  MomentKey adj;
  int creates = 0, annihilates = 0;
  for (const auto& op : ops) {
    if (op.kind == OpKind::create) ++creates;
    if (op.kind == OpKind::annihilate) ++annihilates;
  }
  for (int i = 0; i < annihilates; ++i) adj.push_back(boson_create());
  for (int i = 0; i < creates; ++i) adj.push_back(boson_annihilate());
  for (const auto& op : ops)
    if (op.kind == OpKind::transition) adj.push_back(transition(op.atom, op.bra, op.ket));
  return relabel_atoms(adj);
}

void validate_moment_ops(const std::vector<ElementaryOp>& ops) {
  std::set<int> atoms;
  for (const auto& op : ops) {
    if (op.kind != OpKind::transition) continue;
    if (op.atom == kSummedAtom)
      throw DerivationError("moment must reference concrete atoms");
    if (!atoms.insert(op.atom).second)
      throw DerivationError("moment holds two factors on one atom; canonicalize first");
  }
}

}  // namespace

NormalizedMoment normalize_moment(const std::vector<ElementaryOp>& ops) {
  validate_moment_ops(ops);
  MomentKey key = relabel_atoms(ops);
  MomentKey adj = adjoint_key(key);
  if (adj < key) return {adj, true};
  return {key, false};
}

bool moment_self_conjugate(const MomentKey& key) { return adjoint_key(key) == key; }

int moment_order(const MomentKey& key) { return static_cast<int>(key.size()); }

std::string moment_name(const MomentKey& key) {
  if (key.empty()) return "<1>";
  std::string s = "<";
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i) s += "*";
    const auto& op = key[i];
    switch (op.kind) {
      case OpKind::create: s += "ad"; break;
      case OpKind::annihilate: s += "a"; break;
      case OpKind::transition:
        s += "s" + std::to_string(op.ket) + std::to_string(op.bra) + "[" +
             std::to_string(op.atom) + "]";
        break;
    }
  }
  return s + ">";
}

int MomentTable::intern(const std::vector<ElementaryOp>& ops, bool* conjugated) {
  NormalizedMoment nm = normalize_moment(ops);
  if (conjugated) *conjugated = nm.conjugated;
  auto it = index_.find(nm.key);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(keys_.size());
  keys_.push_back(nm.key);
  index_.emplace(std::move(nm.key), id);
  return id;
}

int MomentTable::find(const std::vector<ElementaryOp>& ops, bool* conjugated) const {
  NormalizedMoment nm = normalize_moment(ops);
  if (conjugated) *conjugated = nm.conjugated;
  auto it = index_.find(nm.key);
  return it == index_.end() ? -1 : it->second;
}

// ---------------------------------------------------------------------------
// Derivation

namespace {

int summed_position(const OperatorTerm& t) {
  for (std::size_t i = 0; i < t.ops.size(); ++i)
    if (t.ops[i].kind == OpKind::transition && t.ops[i].atom == kSummedAtom)
      return static_cast<int>(i);
  return -1;
}

OperatorTerm substitute_atom(OperatorTerm t, int pos, int atom) {
  t.ops[static_cast<std::size_t>(pos)].atom = static_cast<std::int16_t>(atom);
  return t;
}

const char* multiplicity_param(std::size_t observed_atoms) {
  switch (observed_atoms) {
    case 0: return "N";
    case 1: return "Nm1";
    case 2: return "Nm2";
    default:
      throw DerivationError("symmetric reduction supports observables on at most two atoms");
  }
}

// Register-sum instantiation of a single term against the observable's atom
// set: one concrete copy per observed atom plus one fresh atom carrying the
// remaining multiplicity (symmetric mode), or an explicit sum (concrete).
std::vector<OperatorTerm> instantiate(const OperatorTerm& t, const std::set<int>& obs_atoms,
                                      AtomSum mode, int n_concrete) {
  int pos = summed_position(t);
  if (pos < 0) return {t};
  std::vector<OperatorTerm> out;
  if (mode == AtomSum::concrete) {
    for (int k = 1; k <= n_concrete; ++k) out.push_back(substitute_atom(t, pos, k));
    return out;
  }
  for (int a : obs_atoms) out.push_back(substitute_atom(t, pos, a));
  int fresh = obs_atoms.empty() ? 1 : *obs_atoms.rbegin() + 1;
  OperatorTerm f = substitute_atom(t, pos, fresh);
  f.coef = f.coef * coef_param(multiplicity_param(obs_atoms.size()));
  out.push_back(std::move(f));
  return out;
}

// Substitutes one concrete atom for every register-summed factor.
OperatorExpr jump_for_atom(const OperatorExpr& x, int atom) {
  std::vector<OperatorTerm> all;
  for (const auto& t : x.terms()) {
    OperatorTerm c = t;
    int pos = summed_position(c);
    if (pos >= 0) c = substitute_atom(std::move(c), pos, atom);
    all.push_back(std::move(c));
  }
  return OperatorExpr(std::move(all));
}

}  // namespace

OperatorExpr derive_moment_eq(const MasterEquation& me, const std::vector<ElementaryOp>& obs,
                              AtomSum mode, int n_concrete) {
  std::set<int> atoms;
  for (const auto& op : obs) {
    if (op.kind != OpKind::transition) continue;
    if (op.atom == kSummedAtom)
      throw DerivationError("observable must reference concrete atoms");
    atoms.insert(op.atom);
  }
  if (mode == AtomSum::concrete) {
    if (n_concrete < 1) throw DerivationError("concrete register needs at least one atom");
    if (!atoms.empty() && *atoms.rbegin() > n_concrete)
      throw DerivationError("observable atom index exceeds the concrete register");
  }

  OperatorTerm obs_term;
  obs_term.ops = obs;
  OperatorExpr o{obs_term};

  OperatorExpr rhs;
  // i <[H, obs]>
  for (const auto& term : me.hamiltonian.terms()) {
    for (const auto& inst : instantiate(term, atoms, mode, n_concrete)) {
      OperatorExpr h{inst};
      rhs = rhs + (h * o - o * h).scaled(cplx(0.0, 1.0));
    }
  }
  // sum_ch rate (<c'oc> - <c'co>/2 - <oc'c>/2); register-summed jumps give
  // one channel per atom.  Atoms outside the observable cancel exactly in
  // the algebra, so only observed atoms and the weighted fresh channel
  // contribute terms.
  for (const auto& ch : me.channels) {
    bool summed = false;
    for (const auto& t : ch.jump.terms()) summed = summed || summed_position(t) >= 0;
    // (jump, channel multiplicity); the multiplicity scales the whole
    // dissipator, never the jump itself.
    std::vector<std::pair<OperatorExpr, Coefficient>> jumps;
    if (!summed) {
      jumps.emplace_back(ch.jump, Coefficient(cplx(1.0)));
    } else if (mode == AtomSum::concrete) {
      for (int k = 1; k <= n_concrete; ++k)
        jumps.emplace_back(jump_for_atom(ch.jump, k), Coefficient(cplx(1.0)));
    } else {
      for (int a : atoms) jumps.emplace_back(jump_for_atom(ch.jump, a), Coefficient(cplx(1.0)));
      int fresh = atoms.empty() ? 1 : *atoms.rbegin() + 1;
      jumps.emplace_back(jump_for_atom(ch.jump, fresh),
                         coef_param(multiplicity_param(atoms.size())));
    }
    for (const auto& [c, weight] : jumps) {
      OperatorExpr cd = adjoint(c);
      OperatorExpr d = cd * o * c - (cd * c * o + o * cd * c).scaled(cplx(0.5));
      rhs = rhs + d.scaled(ch.rate * weight);
    }
  }
  return rhs;
}

namespace {

MomentRef intern_ref(MomentTable& table, const std::vector<ElementaryOp>& ops) {
  bool cj = false;
  int v = table.intern(ops, &cj);
  return {v, cj};
}

}  // namespace

std::vector<ClosedTerm> cumulant_close(const OperatorTerm& term, MomentTable& table) {
  const std::size_t k = term.ops.size();
  std::vector<ClosedTerm> out;
  if (k == 0) {
    out.push_back({term.coef, {}});
    return out;
  }
  if (k <= 2) {
    out.push_back({term.coef, {intern_ref(table, term.ops)}});
    return out;
  }
  if (k == 3) {
    const ElementaryOp& x = term.ops[0];
    const ElementaryOp& y = term.ops[1];
    const ElementaryOp& z = term.ops[2];
    MomentRef rx = intern_ref(table, {x});
    MomentRef ry = intern_ref(table, {y});
    MomentRef rz = intern_ref(table, {z});
    MomentRef ryz = intern_ref(table, {y, z});
    MomentRef rxz = intern_ref(table, {x, z});
    MomentRef rxy = intern_ref(table, {x, y});
    out.push_back({term.coef, {rx, ryz}});
    out.push_back({term.coef, {ry, rxz}});
    out.push_back({term.coef, {rz, rxy}});
    Coefficient c2 = term.coef;
    c2.value *= -2.0;
    out.push_back({c2, {rx, ry, rz}});
    return out;
  }
  throw DerivationError("second-order closure cannot express an order-" + std::to_string(k) +
                        " moment: " + term_str(term));
}

// ---------------------------------------------------------------------------
// Completion

namespace {

void merge_closed_terms(std::vector<ClosedTerm>& eq) {
  for (auto& t : eq) std::sort(t.refs.begin(), t.refs.end());
  std::sort(eq.begin(), eq.end(), [](const ClosedTerm& a, const ClosedTerm& b) {
    auto ka = std::tie(a.refs, a.coef.params, a.coef.phase);
    auto kb = std::tie(b.refs, b.coef.params, b.coef.phase);
    return ka < kb;
  });
  std::vector<ClosedTerm> merged;
  for (auto& t : eq) {
    if (!merged.empty() && merged.back().refs == t.refs &&
        merged.back().coef.params == t.coef.params && merged.back().coef.phase == t.coef.phase)
      merged.back().coef.value += t.coef.value;
    else
      merged.push_back(std::move(t));
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const ClosedTerm& t) { return t.coef.is_zero(); }),
               merged.end());
  eq = std::move(merged);
}

}  // namespace

MomentSystem complete_moment_system(const MasterEquation& me, const std::vector<MomentKey>& seeds,
                                    int max_vars) {
  MomentSystem sys;
  sys.me = me;
  for (const auto& s : seeds) sys.table.intern(s, nullptr);
  for (int v = 0; v < static_cast<int>(sys.table.size()); ++v) {
    if (static_cast<int>(sys.table.size()) > max_vars)
      throw DerivationError("moment completion exceeds " + std::to_string(max_vars) +
                            " variables");
    MomentKey key = sys.table.keys()[static_cast<std::size_t>(v)];
    OperatorExpr rhs = derive_moment_eq(me, key, AtomSum::symmetric);
    std::vector<ClosedTerm> eq;
    for (const auto& term : rhs.terms()) {
      auto closed = cumulant_close(term, sys.table);
      eq.insert(eq.end(), closed.begin(), closed.end());
    }
    merge_closed_terms(eq);
    sys.eqs.push_back(std::move(eq));
  }
  if (static_cast<int>(sys.table.size()) > max_vars)
    throw DerivationError("moment completion exceeds " + std::to_string(max_vars) + " variables");
  sys.self_conj.reserve(sys.table.size());
  for (const auto& key : sys.table.keys()) sys.self_conj.push_back(moment_self_conjugate(key));
  return sys;
}

namespace {

std::string closed_term_str(const ClosedTerm& t, const MomentSystem& sys) {
  OperatorTerm pseudo;
  pseudo.coef = t.coef;
  std::string s = term_str(pseudo);
  for (const auto& r : t.refs) {
    std::string m = moment_name(sys.table.keys()[static_cast<std::size_t>(r.var)]);
    s += "*" + (r.conj ? "conj" + m : m);
  }
  return s;
}

}  // namespace

std::string MomentSystem::describe() const {
  std::ostringstream os;
  for (std::size_t v = 0; v < table.size(); ++v) {
    os << "d" << moment_name(table.keys()[v]) << "/dt =";
    if (eqs[v].empty()) os << " 0";
    for (const auto& t : eqs[v]) os << "  " << closed_term_str(t, *this);
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Binding

std::shared_ptr<const CompiledSystem> bind_params(std::shared_ptr<const MomentSystem> sys,
                                                  const ParamBindings& binds) {
  auto cs = std::make_shared<CompiledSystem>();
  cs->source_ = sys;
  cs->keys_ = sys->table.keys();
  cs->self_conj_ = sys->self_conj;
  cs->binds_ = binds;

  for (const auto& def : sys->me.defs) {
    double v = 0.0;
    for (const auto& [id, mult] : def.combo) v += mult * cs->binds_.get(id).real();
    cs->binds_.values[def.param] = cplx(v, 0.0);
  }
  {
    int id_n = param_id("N");
    auto it = cs->binds_.values.find(id_n);
    if (it != cs->binds_.values.end()) {
      double n = it->second.real();
      cs->binds_.values[param_id("Nm1")] = cplx(n - 1.0, 0.0);
      cs->binds_.values[param_id("Nm2")] = cplx(n - 2.0, 0.0);
    }
  }

  cs->offsets_.resize(cs->keys_.size());
  int off = 0;
  for (std::size_t v = 0; v < cs->keys_.size(); ++v) {
    cs->offsets_[v] = off;
    off += cs->self_conj_[v] ? 1 : 2;
  }
  cs->n_real_ = off;

  cs->eqs_.resize(sys->eqs.size());
  for (std::size_t v = 0; v < sys->eqs.size(); ++v) {
    for (const auto& ct : sys->eqs[v]) {
      if (ct.coef.has_phase())
        throw DerivationError(
            "equations carry explicit time dependence; apply static_frame before binding");
      CompiledSystem::Term t;
      t.c = cs->binds_.eval(ct.coef, 0.0);
      if (t.c == cplx(0.0, 0.0)) continue;
      if (ct.refs.size() > 3) throw DerivationError("tape term with more than three factors");
      t.n = static_cast<int>(ct.refs.size());
      for (int i = 0; i < t.n; ++i)
        t.f[i] = {ct.refs[static_cast<std::size_t>(i)].var,
                  ct.refs[static_cast<std::size_t>(i)].conj};
      cs->eqs_[v].push_back(t);
    }
  }

  for (std::size_t v = 0; v < cs->eqs_.size(); ++v)
    for (const auto& t : cs->eqs_[v])
      if (t.n == 1 && t.f[0].var == static_cast<int>(v)) {
        cs->diag_rate_scale_ = std::max(cs->diag_rate_scale_, std::abs(t.c));
        cs->decay_rate_scale_ = std::max(cs->decay_rate_scale_, std::abs(t.c.real()));
      }

  cs->z_.resize(cs->keys_.size());
  cs->dz_.resize(cs->keys_.size());
  return cs;
}

// ---------------------------------------------------------------------------
// Tape evaluation

std::vector<cplx> CompiledSystem::unpack(const double* y) const {
  std::vector<cplx> z(keys_.size());
  for (std::size_t v = 0; v < keys_.size(); ++v) {
    int o = offsets_[v];
    z[v] = self_conj_[v] ? cplx(y[o], 0.0) : cplx(y[o], y[o + 1]);
  }
  return z;
}

void CompiledSystem::pack(const std::vector<cplx>& z, double* y) const {
  for (std::size_t v = 0; v < keys_.size(); ++v) {
    int o = offsets_[v];
    y[o] = z[v].real();
    if (!self_conj_[v]) y[o + 1] = z[v].imag();
  }
}

cplx CompiledSystem::moment_value(const double* y, int var, bool conjugated) const {
  int o = offsets_[static_cast<std::size_t>(var)];
  cplx z = self_conj_[static_cast<std::size_t>(var)] ? cplx(y[o], 0.0) : cplx(y[o], y[o + 1]);
  return conjugated ? std::conj(z) : z;
}

int CompiledSystem::find_moment(const std::vector<ElementaryOp>& ops, bool* conjugated) const {
  return source_->table.find(ops, conjugated);
}

void CompiledSystem::eval(const double* y, double* dy) const {
  auto& z = z_;
  for (std::size_t v = 0; v < keys_.size(); ++v) {
    int o = offsets_[v];
    z[v] = self_conj_[v] ? cplx(y[o], 0.0) : cplx(y[o], y[o + 1]);
  }
  for (std::size_t v = 0; v < eqs_.size(); ++v) {
    cplx acc(0.0, 0.0);
    for (const auto& t : eqs_[v]) {
      cplx p = t.c;
      for (int i = 0; i < t.n; ++i) {
        const cplx& zz = z[static_cast<std::size_t>(t.f[i].var)];
        p *= t.f[i].conj ? std::conj(zz) : zz;
      }
      acc += p;
    }
    int o = offsets_[v];
    dy[o] = acc.real();
    if (!self_conj_[v]) dy[o + 1] = acc.imag();
  }
}

void CompiledSystem::jacobian(const double* y, Eigen::MatrixXd& jac) const {
  auto& z = z_;
  for (std::size_t v = 0; v < keys_.size(); ++v) {
    int o = offsets_[v];
    z[v] = self_conj_[v] ? cplx(y[o], 0.0) : cplx(y[o], y[o + 1]);
  }
  jac.setZero(n_real_, n_real_);
  for (std::size_t v = 0; v < eqs_.size(); ++v) {
    const int row = offsets_[v];
    const bool sc_row = self_conj_[v];
    for (const auto& t : eqs_[v]) {
      for (int p = 0; p < t.n; ++p) {
        cplx g = t.c;
        for (int q = 0; q < t.n; ++q) {
          if (q == p) continue;
          const cplx& zz = z[static_cast<std::size_t>(t.f[q].var)];
          g *= t.f[q].conj ? std::conj(zz) : zz;
        }
        const int cv = t.f[p].var;
        const int col = offsets_[static_cast<std::size_t>(cv)];
        jac(row, col) += g.real();
        if (!sc_row) jac(row + 1, col) += g.imag();
        if (!self_conj_[static_cast<std::size_t>(cv)]) {
          cplx gi = t.f[p].conj ? cplx(0.0, -1.0) * g : cplx(0.0, 1.0) * g;
          jac(row, col + 1) += gi.real();
          if (!sc_row) jac(row + 1, col + 1) += gi.imag();
        }
      }
    }
  }
}

std::string CompiledSystem::describe_layout() const {
  std::ostringstream os;
  for (std::size_t v = 0; v < keys_.size(); ++v)
    os << offsets_[v] << (self_conj_[v] ? " (re)   " : " (re,im)") << "  "
       << moment_name(keys_[v]) << "\n";
  return os.str();
}

}  // namespace raman
