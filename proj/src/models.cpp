#include "raman/models.hpp"

#include <cmath>
#include <limits>

namespace raman {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;
}

double PhysicalParams::collective_coupling() const { return std::sqrt(n_atoms) * g31; }

PhysicalParams PhysicalParams::reference() {
  PhysicalParams p;
  p.w32 = kTau * (3.77e14 - 2e9);
  p.w31 = p.w32 + kTau * 6.8e9;
  p.wd = p.w32 + kTau * 2e9;
  p.wc = p.w31 + kTau * 2e9;  // wc - w31 = wd - w32: two-photon resonance
  p.kappa = kTau * 11e6;
  p.g31 = kTau * 506e3;
  p.Omega = kTau * 5e6;
  p.gamma31 = kTau * 5.75e6;
  p.gamma12 = 0.0;
  p.n_atoms = 1e4;
  return p;
}

EffectiveParams derive_effective(const PhysicalParams& p) {
  const cplx denom(p.w32 - p.wd, -0.5 * p.gamma31);  // excited-level response
  if (std::abs(denom) == 0.0)
    throw DerivationError(
        "adiabatic elimination needs a detuned drive or a damped excited level");
  if (p.kappa <= 0.0)
    throw DerivationError("Purcell-enhanced rate needs a lossy cavity (kappa > 0)");

  EffectiveParams e;
  e.detuning = p.wd - p.w32;
  e.g21 = -p.g31 * p.Omega / denom;
  e.gamma21 = p.gamma31 * p.Omega * p.Omega / std::norm(denom);
  e.Gamma = 4.0 * std::norm(e.g21) / p.kappa;
  const double scale = std::max(p.Omega, p.gamma31);
  e.ratio = scale > 0.0 ? std::abs(e.detuning) / scale
                        : std::numeric_limits<double>::infinity();
  e.adiabatic_ok = e.ratio >= 10.0;
  return e;
}

MasterEquation full_model() {
  MasterEquation me;
  me.n_levels = 3;
  const OperatorExpr cavity_arm(OperatorTerm{
      with_phase(coef_param("g31"), {{"wc", 1}, {"w31", -1}}),
      {boson_create(), transition(kSummedAtom, 1, 3)}});
  const OperatorExpr drive_arm(OperatorTerm{
      with_phase(coef_param("Omega"), {{"wd", 1}, {"w32", -1}}),
      {transition(kSummedAtom, 2, 3)}});
  me.hamiltonian = cavity_arm + adjoint(cavity_arm) + drive_arm + adjoint(drive_arm);
  me.channels.push_back({coef_param("kappa"), OperatorExpr::single(boson_annihilate())});
  me.channels.push_back(
      {coef_param("gamma31"), OperatorExpr::single(transition(kSummedAtom, 1, 3))});
  me.channels.push_back(
      {coef_param("gamma12"), OperatorExpr::single(transition(kSummedAtom, 2, 1))});
  return me;
}

MasterEquation effective_model() {
  MasterEquation me;
  me.n_levels = 2;
  const OperatorExpr raman_arm(OperatorTerm{
      with_phase(coef_param("g21"), {{"wc", 1}, {"w31", -1}, {"wd", -1}, {"w32", 1}}),
      {boson_create(), transition(kSummedAtom, 1, 2)}});
  me.hamiltonian = raman_arm + adjoint(raman_arm);
  me.channels.push_back({coef_param("kappa"), OperatorExpr::single(boson_annihilate())});
  me.channels.push_back(
      {coef_param("gamma21"), OperatorExpr::single(transition(kSummedAtom, 1, 2))});
  me.channels.push_back(
      {coef_param("gamma12"), OperatorExpr::single(transition(kSummedAtom, 2, 1))});
  return me;
}

ParamBindings bind_full(const PhysicalParams& p) {
  ParamBindings b;
  b.set("g31", p.g31);
  b.set("Omega", p.Omega);
  b.set("kappa", p.kappa);
  b.set("gamma31", p.gamma31);
  b.set("gamma12", p.gamma12);
  b.set("wc", p.wc);
  b.set("w31", p.w31);
  b.set("wd", p.wd);
  b.set("w32", p.w32);
  b.set("N", p.n_atoms);
  return b;
}

ParamBindings bind_effective(const PhysicalParams& p) {
  const EffectiveParams e = derive_effective(p);
  ParamBindings b;
  b.set("g21", e.g21);
  b.set("gamma21", e.gamma21);
  b.set("kappa", p.kappa);
  b.set("gamma12", p.gamma12);
  b.set("wc", p.wc);
  b.set("w31", p.w31);
  b.set("wd", p.wd);
  b.set("w32", p.w32);
  b.set("N", p.n_atoms);
  return b;
}

std::vector<MomentKey> default_seeds_full() {
  return {
      {boson_create(), boson_annihilate()},
      {boson_create()},
      {transition(1, 1, 1)},
      {transition(1, 2, 2)},
      {transition(1, 3, 3)},
      {transition(1, 1, 2), transition(2, 1, 2)},
      {transition(1, 1, 2), transition(2, 2, 1)},
      {transition(1, 2, 2), transition(2, 2, 2)},
  };
}

std::vector<MomentKey> default_seeds_effective() {
  return {
      {boson_create(), boson_annihilate()},
      {boson_create()},
      {transition(1, 1, 1)},
      {transition(1, 2, 2)},
      {transition(1, 1, 2), transition(2, 1, 2)},
      {transition(1, 1, 2), transition(2, 2, 1)},
      {transition(1, 2, 2), transition(2, 2, 2)},
  };
}

Eigen::VectorXd all_atoms_on_level(const CompiledSystem& sys, int level) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(sys.n_real());
  bool conj = false;
  const int pop = sys.find_moment({transition(1, level, level)}, &conj);
  if (pop < 0) throw DerivationError("tracked moments miss the initial level population");
  y[sys.offset(pop)] = 1.0;
  const int pair =
      sys.find_moment({transition(1, level, level), transition(2, level, level)}, &conj);
  if (pair >= 0) y[sys.offset(pair)] = 1.0;  // product state factorizes
  return y;
}

}  // namespace raman
