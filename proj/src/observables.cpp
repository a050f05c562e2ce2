#include "raman/observables.hpp"

#include <algorithm>
#include <cmath>

#include "raman/opalgebra.hpp"

namespace raman {

namespace {

cplx mean(const CompiledSystem& sys, const Eigen::VectorXd& y,
          const std::vector<ElementaryOp>& ops) {
  bool conj = false;
  int var = sys.find_moment(ops, &conj);
  if (var < 0) {
    throw ObservablesError("collective observable needs untracked moment " +
                           moment_name(normalize_moment(ops).key));
  }
  return sys.moment_value(y.data(), var, conj);
}

void check_state(const CompiledSystem& sys, const Eigen::VectorXd& y) {
  if (y.size() != sys.n_real()) {
    throw ObservablesError("state vector does not match the compiled layout");
  }
}

}  // namespace

DickeCoordinates dicke_coordinates(const CompiledSystem& sys, const Eigen::VectorXd& y) {
  check_state(sys, y);
  const double n = sys.binds().real("N");

  const ElementaryOp low1 = transition(1, 1, 2);
  const ElementaryOp up1 = transition(1, 2, 1);
  const ElementaryOp low2 = transition(2, 1, 2);
  const ElementaryOp up2 = transition(2, 2, 1);
  const ElementaryOp pop1 = transition(1, 2, 2);
  const ElementaryOp pop2 = transition(2, 2, 2);

  const double s22 = mean(sys, y, {pop1}).real();
  const double ll = mean(sys, y, {low1, low2}).real();  // Re<s12 s12>, = Re<s21 s21>
  const double lu = mean(sys, y, {low1, up2}).real();   // <s12 s21>, exchange makes it real
  const double pp = mean(sys, y, {pop1, pop2}).real();

  const double pair = n * (n - 1.0) / 4.0;
  DickeCoordinates dc;
  dc.jx2 = n / 4.0 + pair * (2.0 * ll + 2.0 * lu);
  dc.jy2 = n / 4.0 - pair * (2.0 * ll - 2.0 * lu);
  dc.jz2 = n / 4.0 + pair * (4.0 * pp - 4.0 * s22 + 1.0);
  dc.m = n * (s22 - 0.5);

  const double disc = 0.25 + dc.jx2 + dc.jy2 + dc.jz2;
  const double raw = -0.5 + std::sqrt(std::max(disc, 0.0));
  const double tol = 1e-6 * n;
  if (raw < -tol || raw > n / 2.0 + tol) {
    throw ObservablesError("second moments give spin length " + std::to_string(raw) +
                           " outside [0, N/2]");
  }
  dc.j = std::clamp(raw, 0.0, n / 2.0);
  return dc;
}

BlochVector bloch_vector(const CompiledSystem& sys, const Eigen::VectorXd& y) {
  check_state(sys, y);
  const double n = sys.binds().real("N");
  const cplx s12 = mean(sys, y, {transition(1, 1, 2)});
  const double s22 = mean(sys, y, {transition(1, 2, 2)}).real();

  BlochVector b;
  b.x = n * s12.real();
  b.y = -n * s12.imag();
  b.z = n * (s22 - 0.5);
  return b;
}

}  // namespace raman
