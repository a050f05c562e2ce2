#pragma once
// Collective-spin readout of a compiled moment state.  The N atoms carry a
// pseudospin-1/2 each on the lasing transition (levels 1 and 2); permutation
// symmetry turns the collective second moments <J_i^2> into single pair
// correlations, from which the Dicke ladder coordinates follow:
//   Jbar (Jbar + 1) = <J_x^2 + J_y^2 + J_z^2>,   Mbar = <J_z>.
// Jbar is clipped to [0, N/2]; inconsistent moments that land outside by
// more than 1e-6 N throw.

#include <Eigen/Dense>

#include <stdexcept>

#include "raman/cumulant.hpp"

namespace raman {

struct ObservablesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DickeCoordinates {
  double j = 0.0;    // spin length Jbar, in [0, N/2]
  double m = 0.0;    // projection Mbar = <J_z>, N (<s22> - 1/2)
  double jx2 = 0.0;  // <J_x^2>
  double jy2 = 0.0;  // <J_y^2>
  double jz2 = 0.0;  // <J_z^2>
};

// Requires the tracked set to include <s22>, <s22 s22>, and the four
// lasing-transition pair coherences; the default seeds provide them.
DickeCoordinates dicke_coordinates(const CompiledSystem& sys, const Eigen::VectorXd& y);

// Mean collective dipole and inversion,
//   x = N Re<s12>,  y = -N Im<s12>,  z = N (<s22> - 1/2).
struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

BlochVector bloch_vector(const CompiledSystem& sys, const Eigen::VectorXd& y);

}  // namespace raman
