#pragma once
// The two physical models: N three-level atoms Raman-coupled to a lossy
// cavity by a far-detuned drive (full model), and the two-level model
// obtained by adiabatic elimination of the excited level (effective model).
// Builders return lab-frame master equations with explicit drive phases;
// pass them through static_frame before compiling.

#include "raman/cumulant.hpp"

namespace raman {

// Angular units (rad/s) throughout.
struct PhysicalParams {
  double wc = 0.0;       // cavity mode
  double w31 = 0.0;      // level 3 <-> 1 transition
  double w32 = 0.0;      // level 3 <-> 2 transition
  double wd = 0.0;       // drive laser
  double kappa = 0.0;    // cavity photon loss
  double g31 = 0.0;      // atom-cavity coupling on 1 <-> 3
  double Omega = 0.0;    // drive strength on 2 <-> 3
  double gamma31 = 0.0;  // spontaneous decay 3 -> 1
  double gamma12 = 0.0;  // incoherent repump 1 -> 2
  double n_atoms = 1e4;

  double detuning() const { return wd - w32; }  // drive to 2<->3 line
  double collective_coupling() const;           // sqrt(N) g31

  // Crossover-regime reference point; drive 2 GHz above the 2<->3 line,
  // cavity on two-photon resonance with the dressed Raman line.
  static PhysicalParams reference();
};

struct EffectiveParams {
  cplx g21;          // two-photon Raman coupling (complex)
  double gamma21;    // effective spontaneous decay 2 -> 1
  double Gamma;      // Purcell-enhanced emission rate 4|g21|^2/kappa
  double detuning;   // wd - w32
  double ratio;      // |detuning| / max(Omega, gamma31)
  bool adiabatic_ok; // ratio >= 10
};

// Adiabatic elimination of level 3.  Throws DerivationError when the drive
// is resonant with an undamped 2<->3 line (no elimination possible).
EffectiveParams derive_effective(const PhysicalParams& p);

MasterEquation full_model();
MasterEquation effective_model();

ParamBindings bind_full(const PhysicalParams& p);
ParamBindings bind_effective(const PhysicalParams& p);

// Moments tracked by default: photon number, field amplitude, populations,
// coherences, and the atom-pair correlations behind collective observables.
std::vector<MomentKey> default_seeds_full();
std::vector<MomentKey> default_seeds_effective();

// Pulse initial state: every atom on level `level`, cavity empty, no
// coherence.  Product state, so pair populations factorize.
Eigen::VectorXd all_atoms_on_level(const CompiledSystem& sys, int level);

}  // namespace raman
