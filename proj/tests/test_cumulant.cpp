#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "raman/models.hpp"
#include "raman/oracle.hpp"

using namespace raman;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

ParamBindings resolved(const MasterEquation& me, ParamBindings b) {
  for (const auto& def : me.defs) {
    double v = 0.0;
    for (const auto& [id, mult] : def.combo) v += mult * b.get(id).real();
    b.values[def.param] = cplx(v, 0.0);
  }
  return b;
}

const MasterEquation::ParamDef* find_def(const MasterEquation& me, const std::string& name) {
  for (const auto& d : me.defs)
    if (param_name(d.param) == name) return &d;
  return nullptr;
}

std::map<std::string, double> combo_by_name(const MasterEquation::ParamDef& def) {
  std::map<std::string, double> out;
  for (const auto& [id, mult] : def.combo) out[param_name(id)] += mult;
  return out;
}

bool combo_close(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end() || std::abs(it->second - v) > 1e-9) return false;
  }
  return true;
}

// One dissipation channel per concrete atom: a register-summed jump denotes
// per-atom channels, never a collective jump operator.
std::vector<std::pair<Coefficient, OperatorExpr>> per_atom_channels(const MasterEquation& me,
                                                                    int n_atoms) {
  std::vector<std::pair<Coefficient, OperatorExpr>> out;
  for (const auto& ch : me.channels) {
    bool summed = false;
    for (const auto& t : ch.jump.terms())
      for (const auto& op : t.ops)
        summed = summed || (op.kind == OpKind::transition && op.atom == kSummedAtom);
    if (!summed) {
      out.emplace_back(ch.rate, ch.jump);
      continue;
    }
    for (int a = 1; a <= n_atoms; ++a) {
      std::vector<OperatorTerm> terms;
      for (OperatorTerm t : ch.jump.terms()) {
        for (auto& op : t.ops)
          if (op.kind == OpKind::transition && op.atom == kSummedAtom)
            op.atom = static_cast<std::int16_t>(a);
        terms.push_back(std::move(t));
      }
      out.emplace_back(ch.rate, OperatorExpr(std::move(terms)));
    }
  }
  return out;
}

OperatorExpr key_expr(const MomentKey& key) {
  OperatorTerm t;
  t.ops = key;
  return OperatorExpr(t);
}

// Projector onto Fock layers 0..keep; states in the band cannot reach the
// truncation boundary under the operator chains the tests evaluate.
Matrix band_projector(const SystemDims& dims, int keep) {
  Matrix p = Matrix::Zero(dims.dim(), dims.dim());
  const int atoms_dim = dims.dim() / dims.fock_dim;
  for (int n = 0; n <= keep && n < dims.fock_dim; ++n)
    for (int j = 0; j < atoms_dim; ++j) p(n * atoms_dim + j, n * atoms_dim + j) = 1.0;
  return p;
}

Eigen::VectorXcd coherent_amplitudes(int dim, cplx alpha) {
  Eigen::VectorXcd v(dim);
  cplx c = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n < dim; ++n) {
    v(n) = c;
    c *= alpha / std::sqrt(static_cast<double>(n + 1));
  }
  return v;
}

cplx trace_prod(const Matrix& a, const Matrix& b) {  // tr(a b)
  return a.cwiseProduct(b.transpose()).sum();
}

// Net excitation moved by the moment: photons plus occupation of the upper
// levels.  The reference dynamics conserves it term by term.
int moment_charge(const MomentKey& key) {
  auto lw = [](int l) { return l >= 2 ? 1 : 0; };
  int q = 0;
  for (const auto& op : key) {
    if (op.kind == OpKind::create) q += 1;
    if (op.kind == OpKind::annihilate) q -= 1;
    if (op.kind == OpKind::transition) q += lw(op.ket) - lw(op.bra);
  }
  return q;
}

}  // namespace

TEST_CASE("adiabatic elimination reproduces the reference parameters") {
  auto p = PhysicalParams::reference();
  auto e = derive_effective(p);
  CHECK(std::abs(e.detuning - kTau * 2e9) < 1.0);
  CHECK(std::abs(e.g21) / kTau == doctest::Approx(1264.9987).epsilon(1e-5));
  CHECK(e.gamma21 / kTau == doctest::Approx(35.9374).epsilon(1e-4));
  CHECK(e.Gamma / kTau == doctest::Approx(0.58190).epsilon(1e-4));
  CHECK(e.adiabatic_ok);
  CHECK(e.ratio == doctest::Approx(2e9 / 5.75e6).epsilon(1e-6));
  // g21 = g31 Omega / (Delta + i gamma31/2): positive real part, small
  // negative imaginary part set by the excited-level width.
  CHECK(e.g21.real() > 0.0);
  CHECK(e.g21.imag() < 0.0);
  CHECK(std::abs(e.g21.imag()) / std::abs(e.g21) ==
        doctest::Approx(0.5 * p.gamma31 / (kTau * 2e9)).epsilon(1e-3));

  auto resonant = p;
  resonant.wd = resonant.w32;
  resonant.gamma31 = 0.0;
  CHECK_THROWS_AS(derive_effective(resonant), DerivationError);
  auto lossless = p;
  lossless.kappa = 0.0;
  CHECK_THROWS_AS(derive_effective(lossless), DerivationError);
}

TEST_CASE("static frame of the driven three-level model") {
  auto me = full_model();
  auto st = static_frame(me);
  CHECK(!st.hamiltonian.has_phase());
  REQUIRE(st.defs.size() == 2);
  const auto* e2 = find_def(st, "eta2");
  const auto* e3 = find_def(st, "eta3");
  REQUIRE(e2 != nullptr);
  REQUIRE(e3 != nullptr);
  CHECK(combo_close(combo_by_name(*e3), {{"w31", 1.0}, {"wc", -1.0}}));
  CHECK(combo_close(combo_by_name(*e2),
                    {{"w31", 1.0}, {"wd", 1.0}, {"wc", -1.0}, {"w32", -1.0}}));

  REQUIRE(st.channels.size() == me.channels.size());
  for (std::size_t i = 0; i < st.channels.size(); ++i) {
    CHECK(st.channels[i].jump == me.channels[i].jump);
    CHECK(st.channels[i].rate.params == me.channels[i].rate.params);
  }

  auto p = PhysicalParams::reference();
  auto b = resolved(st, bind_full(p));
  CHECK(b.real("eta3") == doctest::Approx(-kTau * 2e9).epsilon(1e-9));
  CHECK(std::abs(b.real("eta2")) < 1.0);  // two-photon resonance

  SystemDims dims{4, 1, 3};
  Matrix lhs = to_matrix(st.hamiltonian, dims, b);
  std::vector<OperatorTerm> hand;
  hand.push_back({Coefficient(cplx(p.g31)), {boson_create(), transition(1, 1, 3)}});
  hand.push_back({Coefficient(cplx(p.g31)), {boson_annihilate(), transition(1, 3, 1)}});
  hand.push_back({Coefficient(cplx(p.Omega)), {transition(1, 2, 3)}});
  hand.push_back({Coefficient(cplx(p.Omega)), {transition(1, 3, 2)}});
  hand.push_back({Coefficient(b.get("eta2")), {transition(1, 2, 2)}});
  hand.push_back({Coefficient(b.get("eta3")), {transition(1, 3, 3)}});
  Matrix rhs = to_matrix(OperatorExpr(std::move(hand)), dims, b);
  CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());

  auto st2 = static_frame(st);  // idempotent
  CHECK(st2.hamiltonian == st.hamiltonian);
  CHECK(st2.defs.size() == st.defs.size());
}

TEST_CASE("static frame rejects incompatible drive phases") {
  MasterEquation me;
  me.n_levels = 2;
  OperatorExpr d1(OperatorTerm{with_phase(coef_param("u1"), {{"f1", 1}}),
                               {transition(kSummedAtom, 1, 2)}});
  OperatorExpr d2(OperatorTerm{with_phase(coef_param("u2"), {{"f2", 1}}),
                               {transition(kSummedAtom, 1, 2)}});
  me.hamiltonian = d1 + adjoint(d1) + d2 + adjoint(d2);
  CHECK_THROWS_AS(static_frame(me), DerivationError);
}

TEST_CASE("moment normalization folds conjugates and relabels atoms") {
  auto nm = normalize_moment({boson_annihilate(), transition(1, 2, 1)});
  CHECK(nm.conjugated);
  CHECK(nm.key == MomentKey{boson_create(), transition(1, 1, 2)});

  nm = normalize_moment({transition(2, 1, 2), transition(5, 2, 1)});
  CHECK(!nm.conjugated);
  CHECK(nm.key == MomentKey{transition(1, 1, 2), transition(2, 2, 1)});
  CHECK(moment_self_conjugate(nm.key));

  nm = normalize_moment({transition(7, 1, 2), transition(3, 1, 2)});
  CHECK(!nm.conjugated);
  CHECK(nm.key == MomentKey{transition(1, 1, 2), transition(2, 1, 2)});
  CHECK(!moment_self_conjugate(nm.key));

  CHECK(moment_self_conjugate({boson_create(), boson_annihilate()}));
  CHECK(moment_self_conjugate({transition(1, 2, 2)}));
  CHECK(!moment_self_conjugate({boson_create()}));

  CHECK(moment_name(MomentKey{boson_create(), boson_annihilate()}) == "<ad*a>");
  CHECK(moment_name(MomentKey{transition(1, 1, 2), transition(2, 2, 1)}) == "<s12[1]*s21[2]>");
  CHECK(moment_name(MomentKey{}) == "<1>");

  CHECK_THROWS_AS(normalize_moment({transition(kSummedAtom, 1, 2)}), DerivationError);
  CHECK_THROWS_AS(normalize_moment({transition(1, 1, 2), transition(1, 2, 1)}),
                  DerivationError);
}

TEST_CASE("second-order closure splits order-three products") {
  MomentTable table;
  OperatorTerm t;
  t.coef = Coefficient(cplx(2.0, 0.0));
  t.ops = {boson_create(), boson_annihilate(), transition(1, 2, 2)};
  auto closed = cumulant_close(t, table);
  REQUIRE(closed.size() == 4);
  CHECK(table.size() == 4);  // <ad>, <s22>, <ad*s22>, <ad*a>
  for (int i = 0; i < 3; ++i) {
    CHECK(closed[static_cast<std::size_t>(i)].refs.size() == 2);
    CHECK(closed[static_cast<std::size_t>(i)].coef.value == cplx(2.0, 0.0));
  }
  CHECK(closed[3].refs.size() == 3);
  CHECK(closed[3].coef.value == cplx(-4.0, 0.0));
  // <a> folds onto conj<ad>: same variable, opposite flag
  CHECK(closed[3].refs[0].var == closed[3].refs[1].var);
  CHECK(closed[3].refs[0].conj != closed[3].refs[1].conj);

  OperatorTerm big;
  big.ops = {boson_create(), boson_create(), boson_annihilate(), boson_annihilate()};
  MomentTable t2;
  try {
    cumulant_close(big, t2);
    FAIL("expected a closure error");
  } catch (const DerivationError& e) {
    CHECK(std::string(e.what()).find("order-4") != std::string::npos);
  }

  OperatorTerm constant;
  constant.coef = Coefficient(cplx(0.0, 3.0));
  MomentTable t3;
  auto k = cumulant_close(constant, t3);
  REQUIRE(k.size() == 1);
  CHECK(k[0].refs.empty());
}

TEST_CASE("level populations are conserved by the derived equations") {
  auto st = static_frame(full_model());
  OperatorExpr sum;
  for (int l = 1; l <= 3; ++l)
    sum = sum + derive_moment_eq(st, {transition(1, l, l)}, AtomSum::symmetric);
  CHECK(sum.is_zero());

  auto p = PhysicalParams::reference();
  p.gamma12 = kTau * 2e3;
  auto sys = std::make_shared<MomentSystem>(complete_moment_system(st, default_seeds_full()));
  auto cs = bind_params(sys, bind_full(p));
  std::vector<double> y(static_cast<std::size_t>(cs->n_real()));
  std::vector<double> dy(static_cast<std::size_t>(cs->n_real()));
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& v : y) v = u(rng);
  cs->eval(y.data(), dy.data());
  bool cj = false;
  double tot = 0.0, scale = 1.0;
  for (int l = 1; l <= 3; ++l) {
    int v = cs->find_moment({transition(1, l, l)}, &cj);
    REQUIRE(v >= 0);
    tot += dy[static_cast<std::size_t>(cs->offset(v))];
    scale = std::max(scale, std::abs(dy[static_cast<std::size_t>(cs->offset(v))]));
  }
  CHECK(std::abs(tot) <= 1e-9 * scale);
}

TEST_CASE("compiled equations of the two-level model match hand-derived forms") {
  auto p = PhysicalParams::reference();
  p.gamma12 = kTau * 1e3;
  auto st = static_frame(effective_model());
  auto sys = std::make_shared<MomentSystem>(complete_moment_system(st, default_seeds_effective()));
  auto cs = bind_params(sys, bind_effective(p));
  auto e = derive_effective(p);
  const double n_atoms = p.n_atoms;

  bool cj = false;
  const int va = cs->find_moment({boson_create()}, &cj);
  REQUIRE(va >= 0);
  REQUIRE(!cj);
  const int vs = cs->find_moment({transition(1, 1, 2)}, &cj);
  REQUIRE(vs >= 0);
  REQUIRE(!cj);
  const int v22 = cs->find_moment({boson_create(), transition(1, 2, 2)}, &cj);
  REQUIRE(v22 >= 0);
  const int v11 = cs->find_moment({boson_create(), transition(1, 1, 1)}, &cj);
  REQUIRE(v11 >= 0);

  std::vector<double> y(static_cast<std::size_t>(cs->n_real()));
  std::vector<double> dy(static_cast<std::size_t>(cs->n_real()));
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (auto& v : y) v = u(rng);
  cs->eval(y.data(), dy.data());

  auto val = [&](int v) { return cs->moment_value(y.data(), v); };
  auto deriv = [&](int v) {
    return cplx(dy[static_cast<std::size_t>(cs->offset(v))],
                dy[static_cast<std::size_t>(cs->offset(v)) + 1]);
  };

  // d<ad>/dt = i conj(g21) N <s21> - kappa/2 <ad>
  cplx want_a = cplx(0.0, 1.0) * std::conj(e.g21) * n_atoms * std::conj(val(vs)) -
                0.5 * p.kappa * val(va);
  CHECK(std::abs(deriv(va) - want_a) <= 1e-9 * (std::abs(want_a) + 1.0));

  // d<s12>/dt = i conj(g21)(<a s22> - <a s11>) - i eta2 <s12>
  //             - (gamma21 + gamma12)/2 <s12>;  eta2 = 0 on resonance
  cplx want_s = cplx(0.0, 1.0) * std::conj(e.g21) * (std::conj(val(v22)) - std::conj(val(v11))) -
                0.5 * (e.gamma21 + p.gamma12) * val(vs);
  CHECK(std::abs(deriv(vs) - want_s) <= 1e-9 * std::abs(want_s) + 1.0);

  // detuned two-photon drive picks up a frame shift -i eta2 <s12>
  auto pd = p;
  pd.wd = pd.w32 + kTau * 1.5e9;
  auto ed = derive_effective(pd);
  auto csd = bind_params(sys, bind_effective(pd));
  const double eta2 = csd->binds().real("eta2");
  CHECK(eta2 == doctest::Approx(-kTau * 0.5e9).epsilon(1e-9));
  csd->eval(y.data(), dy.data());
  cplx want_d = cplx(0.0, 1.0) * std::conj(ed.g21) * (std::conj(val(v22)) - std::conj(val(v11))) -
                cplx(0.0, 1.0) * eta2 * val(vs) - 0.5 * (ed.gamma21 + pd.gamma12) * val(vs);
  CHECK(std::abs(deriv(vs) - want_d) <= 1e-9 * std::abs(want_d) + 1.0);
}

TEST_CASE("closed equations match the exact generator on low-cumulant states") {
  auto p = PhysicalParams::reference();
  p.n_atoms = 2.0;
  p.gamma12 = kTau * 4e5;
  auto st = static_frame(full_model());
  auto sys = std::make_shared<MomentSystem>(complete_moment_system(st, default_seeds_full()));
  auto cs = bind_params(sys, bind_full(p));
  const auto& binds = cs->binds();

  SystemDims dims{10, 2, 3};
  LiouvillianSpec spec{st.hamiltonian, per_atom_channels(st, 2), dims, binds};

  std::vector<OperatorExpr> exprs;
  for (const auto& key : cs->keys()) exprs.push_back(key_expr(key));

  for (int trial = 0; trial < 4; ++trial) {
    Matrix rho_cav;
    if (trial % 2 == 0) {
      auto v = coherent_amplitudes(dims.fock_dim, cplx(0.2, -0.12));
      rho_cav = v * v.adjoint();
    } else {
      rho_cav = Matrix::Zero(dims.fock_dim, dims.fock_dim);
      const double q = 0.25 / 1.25;
      for (int n = 0; n <= 3; ++n) rho_cav(n, n) = std::pow(q, n);
    }
    rho_cav /= rho_cav.trace().real();
    Matrix rho_at = random_density(SystemDims{1, 1, 3}, 100u + static_cast<unsigned>(trial));
    Matrix rho =
        Eigen::kroneckerProduct(rho_cav, Eigen::kroneckerProduct(rho_at, rho_at).eval()).eval();

    auto z = moments(rho, exprs, dims, binds, 0.0);
    for (int v = 0; v < cs->n_vars(); ++v)
      if (cs->self_conj()[static_cast<std::size_t>(v)])
        CHECK(std::abs(z[static_cast<std::size_t>(v)].imag()) < 1e-10);

    std::vector<double> y(static_cast<std::size_t>(cs->n_real()));
    std::vector<double> dy(static_cast<std::size_t>(cs->n_real()));
    cs->pack(z, y.data());
    cs->eval(y.data(), dy.data());

    Matrix lrho = liouvillian_apply(spec, rho, 0.0);
    auto dz = moments(lrho, exprs, dims, binds, 0.0);
    double scale = 1.0;
    for (const auto& v : dz) scale = std::max(scale, std::abs(v));
    for (int v = 0; v < cs->n_vars(); ++v) {
      cplx mine = cs->self_conj()[static_cast<std::size_t>(v)]
                      ? cplx(dy[static_cast<std::size_t>(cs->offset(v))], 0.0)
                      : cplx(dy[static_cast<std::size_t>(cs->offset(v))],
                             dy[static_cast<std::size_t>(cs->offset(v)) + 1]);
      CHECK(std::abs(mine - dz[static_cast<std::size_t>(v)]) <= 1e-9 * scale);
      if (cs->self_conj()[static_cast<std::size_t>(v)])
        CHECK(std::abs(dz[static_cast<std::size_t>(v)].imag()) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("unclosed concrete derivation matches the exact generator on random states") {
  auto p = PhysicalParams::reference();
  p.gamma12 = kTau * 4e5;
  auto st = static_frame(full_model());
  auto binds = resolved(st, bind_full(p));

  SystemDims dims{8, 2, 3};
  LiouvillianSpec spec{st.hamiltonian, per_atom_channels(st, 2), dims, binds};
  const Matrix band = band_projector(dims, 4);

  auto sys = complete_moment_system(st, default_seeds_full());
  std::vector<Matrix> m_obs, m_rhs;
  for (const auto& key : sys.table.keys()) {
    m_obs.push_back(to_matrix(key_expr(key), dims, binds));
    m_rhs.push_back(to_matrix(derive_moment_eq(st, key, AtomSum::concrete, 2), dims, binds));
  }

  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    Matrix rho = random_density(dims, 1000u + static_cast<unsigned>(s));
    rho = (band * rho * band).eval();
    rho /= rho.trace().real();
    Matrix lrho = liouvillian_apply(spec, rho, 0.0);
    double scale = 1.0;
    std::vector<cplx> lhs(m_obs.size()), mine(m_obs.size());
    for (std::size_t i = 0; i < m_obs.size(); ++i) {
      lhs[i] = trace_prod(lrho, m_obs[i]);
      mine[i] = trace_prod(rho, m_rhs[i]);
      scale = std::max(scale, std::abs(lhs[i]));
    }
    for (std::size_t i = 0; i < m_obs.size(); ++i)
      worst = std::max(worst, std::abs(lhs[i] - mine[i]) / scale);
  }
  CHECK(worst < 1e-9);
  MESSAGE("worst relative deviation over " << sys.table.size() << " variables: " << worst);
}

TEST_CASE("analytic tape Jacobian matches finite differences") {
  auto st = static_frame(full_model());
  auto sys = std::make_shared<MomentSystem>(complete_moment_system(st, default_seeds_full()));
  auto p = PhysicalParams::reference();
  p.gamma12 = kTau * 1e5;
  auto cs = bind_params(sys, bind_full(p));
  const int n = cs->n_real();
  std::vector<double> y(static_cast<std::size_t>(n));
  std::vector<double> f1(static_cast<std::size_t>(n)), f2(static_cast<std::size_t>(n));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& v : y) v = u(rng);

  Eigen::MatrixXd jac;
  cs->jacobian(y.data(), jac);
  REQUIRE(jac.rows() == n);
  REQUIRE(jac.cols() == n);
  const double ref = jac.cwiseAbs().maxCoeff();
  const double h = 1e-6;
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    auto yp = y, ym = y;
    yp[static_cast<std::size_t>(j)] += h;
    ym[static_cast<std::size_t>(j)] -= h;
    cs->eval(yp.data(), f1.data());
    cs->eval(ym.data(), f2.data());
    for (int i = 0; i < n; ++i) {
      double fd = (f1[static_cast<std::size_t>(i)] - f2[static_cast<std::size_t>(i)]) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - jac(i, j)));
    }
  }
  CHECK(worst <= 1e-7 * ref);
}

TEST_CASE("excitation-carrying moments stay dark without a seed field") {
  auto st = static_frame(full_model());
  auto sys = std::make_shared<MomentSystem>(complete_moment_system(st, default_seeds_full()));
  auto cs = bind_params(sys, bind_full(PhysicalParams::reference()));
  auto y = all_atoms_on_level(*cs, 2);
  std::vector<double> dy(static_cast<std::size_t>(cs->n_real()));
  cs->eval(y.data(), dy.data());
  int charged = 0;
  for (int v = 0; v < cs->n_vars(); ++v) {
    if (moment_charge(cs->keys()[static_cast<std::size_t>(v)]) == 0) continue;
    ++charged;
    CHECK(dy[static_cast<std::size_t>(cs->offset(v))] == 0.0);
    if (!cs->self_conj()[static_cast<std::size_t>(v)])
      CHECK(dy[static_cast<std::size_t>(cs->offset(v)) + 1] == 0.0);
  }
  CHECK(charged > 0);
}

TEST_CASE("pulse initial state sets one level and its pair correlation") {
  auto st = static_frame(full_model());
  auto sys = std::make_shared<MomentSystem>(complete_moment_system(st, default_seeds_full()));
  auto cs = bind_params(sys, bind_full(PhysicalParams::reference()));
  auto y = all_atoms_on_level(*cs, 2);
  REQUIRE(y.size() == cs->n_real());
  bool cj = false;
  CHECK(y[cs->offset(cs->find_moment({transition(1, 2, 2)}, &cj))] == 1.0);
  CHECK(y[cs->offset(cs->find_moment({transition(1, 2, 2), transition(2, 2, 2)}, &cj))] == 1.0);
  CHECK(y.sum() == 2.0);
}

TEST_CASE("moment completion closes with a bounded variable set") {
  auto st = static_frame(full_model());
  auto sys = complete_moment_system(st, default_seeds_full());
  auto cs =
      bind_params(std::make_shared<MomentSystem>(sys), bind_full(PhysicalParams::reference()));
  MESSAGE("three-level model: " << sys.table.size() << " moment variables, " << cs->n_real()
                                << " real components");
  CHECK(sys.table.size() <= 120);

  auto ste = static_frame(effective_model());
  auto syse = complete_moment_system(ste, default_seeds_effective());
  MESSAGE("two-level model: " << syse.table.size() << " moment variables");
  CHECK(syse.table.size() <= 40);

  auto again = complete_moment_system(st, default_seeds_full());
  CHECK(again.table.keys() == sys.table.keys());  // deterministic

  CHECK_THROWS_AS(complete_moment_system(st, default_seeds_full(), 5), DerivationError);
}

TEST_CASE("binding rejects time-dependent equations") {
  auto sys =
      std::make_shared<MomentSystem>(complete_moment_system(full_model(), default_seeds_full()));
  CHECK_THROWS_AS(bind_params(sys, bind_full(PhysicalParams::reference())), DerivationError);
}
