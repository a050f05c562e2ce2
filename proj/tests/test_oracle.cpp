#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "raman/models.hpp"
#include "raman/oracle.hpp"

using namespace raman;

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

OperatorExpr product(std::vector<ElementaryOp> ops, Coefficient c = Coefficient(cplx(1.0))) {
  OperatorTerm t;
  t.coef = std::move(c);
  t.ops = std::move(ops);
  return OperatorExpr(t);
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

}  // namespace

TEST_CASE("vacuum Rabi oscillation runs at twice the coupling") {
  // One excitation shared between atom and mode: population returns with
  // period pi/g, so the first minimum of the excited population sits at
  // pi/(2 g) and the mode splitting is 2 g.
  const double g = 1.3;
  SystemDims dims{4, 1, 3};

  OperatorExpr half = product({boson_create(), transition(1, 1, 3)}, coef_param("g31"));
  OperatorExpr ham = half + adjoint(half);
  ParamBindings binds;
  binds.set("g31", g);

  LiouvillianSpec spec{ham, {}, dims, binds};
  Matrix rho0 = vacuum_state(dims, {3});

  ExactOptions opt;
  opt.n_out = 400;
  const double t1 = kTau / (2.0 * g);  // one full population period
  auto snaps = evolve_exact(spec, rho0, 0.0, t1, opt);

  OperatorExpr pop3 = product({transition(1, 3, 3)});
  OperatorExpr photons = product({boson_create(), boson_annihilate()});

  std::vector<double> p3;
  for (const auto& s : snaps) {
    auto z = moments(s.rho, {pop3, photons}, dims, binds, s.t);
    p3.push_back(z[0].real());
    CHECK(std::abs(z[0] + z[1] - cplx(1.0)) < 1e-8);  // excitation conserved
  }

  std::size_t imin = 1;
  for (std::size_t i = 1; i + 1 < p3.size(); ++i)
    if (p3[i] < p3[imin]) imin = i;
  // parabolic refinement around the sampled minimum
  const double dt = snaps[1].t - snaps[0].t;
  const double a = p3[imin - 1], b = p3[imin], c = p3[imin + 1];
  const double tmin = snaps[imin].t + 0.5 * dt * (a - c) / (a - 2.0 * b + c);

  const double splitting = kTau / (2.0 * tmin);  // 2g from t_min = pi/(2g)
  CHECK(std::abs(splitting - 2.0 * g) < 0.005 * 2.0 * g);
  CHECK(b < 1e-3);  // full contrast
}

TEST_CASE("generator preserves trace and Hermiticity") {
  // Absolute trace check needs order-one rates: optical-scale Hamiltonians
  // bury the cancellation under rounding.
  MasterEquation me = full_model();
  ParamBindings b;
  b.set("g31", 0.9);
  b.set("Omega", 1.1);
  b.set("kappa", 1.3);
  b.set("gamma31", 0.7);
  b.set("gamma12", 0.2);
  b.set("wc", 1.7);
  b.set("w31", 0.6);
  b.set("wd", 1.1);
  b.set("w32", 0.9);

  SystemDims dims{4, 2, 3};
  LiouvillianSpec spec{me.hamiltonian, per_atom_channels(me, 2), dims, b};

  for (unsigned seed = 1; seed <= 5; ++seed) {
    Matrix rho = random_density(dims, seed);
    Matrix lrho = liouvillian_apply(spec, rho, 0.37);
    CHECK(std::abs(lrho.trace()) < 1e-12);
    CHECK((lrho - lrho.adjoint()).norm() < 1e-12 * std::max(1.0, lrho.norm()));
  }
}

TEST_CASE("spontaneous decay follows the exponential law") {
  SystemDims dims{3, 1, 3};
  const double gamma = 0.9;
  ParamBindings binds;
  binds.set("gamma31", gamma);
  std::vector<std::pair<Coefficient, OperatorExpr>> channels;
  channels.emplace_back(coef_param("gamma31"), product({transition(1, 1, 3)}));
  LiouvillianSpec spec{OperatorExpr::zero(), channels, dims, binds};

  OperatorExpr pop3 = product({transition(1, 3, 3)});
  OperatorExpr pop1 = product({transition(1, 1, 1)});
  OperatorExpr coh13 = product({transition(1, 1, 3)});

  SUBCASE("population transfer") {
    Matrix rho0 = vacuum_state(dims, {3});
    auto snaps = evolve_exact(spec, rho0, 0.0, 3.0);
    for (const auto& s : snaps) {
      auto z = moments(s.rho, {pop3, pop1}, dims, binds, s.t);
      const double want = std::exp(-gamma * s.t);
      CHECK(std::abs(z[0].real() - want) < 1e-7);
      CHECK(std::abs(z[1].real() - (1.0 - want)) < 1e-7);
      CHECK(std::abs(s.rho.trace() - cplx(1.0)) < 1e-9);
    }
  }

  SUBCASE("coherence decays at half the population rate") {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dims.dim());
    psi(0) = 1.0 / std::sqrt(2.0);  // no photon, atom on 1
    psi(2) = 1.0 / std::sqrt(2.0);  // no photon, atom on 3
    Matrix rho0 = psi * psi.adjoint();
    auto snaps = evolve_exact(spec, rho0, 0.0, 3.0);
    for (const auto& s : snaps) {
      auto z = moments(s.rho, {coh13}, dims, binds, s.t);
      CHECK(std::abs(std::abs(z[0]) - 0.5 * std::exp(-0.5 * gamma * s.t)) < 1e-7);
    }
  }
}

TEST_CASE("photon cutoff grows once when the tail is occupied") {
  // Two quanta in a three-level mode put weight on the top two Fock layers,
  // so the run restarts with the cutoff doubled and reports the larger state.
  SystemDims dims{3, 1, 2};
  ParamBindings binds;
  binds.set("kappa", 1.0);
  std::vector<std::pair<Coefficient, OperatorExpr>> channels;
  channels.emplace_back(coef_param("kappa"), product({boson_annihilate()}));
  LiouvillianSpec spec{OperatorExpr::zero(), channels, dims, binds};

  Matrix rho0 = Matrix::Zero(dims.dim(), dims.dim());
  rho0(2 * dims.n_levels + 0, 2 * dims.n_levels + 0) = 1.0;  // two photons, atom on 1

  ExactOptions opt;
  opt.n_out = 40;
  auto snaps = evolve_exact(spec, rho0, 0.0, 2.0, opt);

  SystemDims grown{6, 1, 2};
  REQUIRE(snaps.front().rho.rows() == grown.dim());

  OperatorExpr photons = product({boson_create(), boson_annihilate()});
  for (const auto& s : snaps) {
    auto z = moments(s.rho, {photons}, grown, binds, s.t);
    CHECK(std::abs(z[0].real() - 2.0 * std::exp(-s.t)) < 1e-6);
    CHECK(std::abs(s.rho.trace() - cplx(1.0)) < 1e-9);
  }
}

TEST_CASE("a drive that outgrows the largest cutoff reports the failure") {
  // A resonant displacement grows the field without bound; one doubling is
  // tried, then the run must fail loudly instead of returning clipped states.
  SystemDims dims{8, 1, 2};
  ParamBindings binds;
  binds.set("wdrive", 2.0);
  OperatorExpr ham = product({boson_create()}, coef_param("wdrive")) +
                     product({boson_annihilate()}, coef_param("wdrive"));
  LiouvillianSpec spec{ham, {}, dims, binds};
  Matrix rho0 = vacuum_state(dims, {1});

  ExactOptions opt;
  opt.n_out = 50;
  bool threw = false;
  try {
    evolve_exact(spec, rho0, 0.0, 2.0, opt);
  } catch (const OracleError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("photon cutoff too small") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("solver rejects oversized problems and bad intervals") {
  SystemDims dims{3, 1, 2};
  LiouvillianSpec spec{OperatorExpr::zero(), {}, dims, {}};
  Matrix rho0 = vacuum_state(dims, {1});

  CHECK_THROWS_AS(evolve_exact(spec, rho0, 1.0, 1.0), OracleError);
  CHECK_THROWS_AS(evolve_exact(spec, Matrix::Identity(4, 4), 0.0, 1.0), OracleError);

  LiouvillianSpec wide = spec;
  wide.dims.n_atoms = 4;
  CHECK_THROWS_AS(evolve_exact(wide, vacuum_state(wide.dims, {1, 1, 1, 1}), 0.0, 1.0), OracleError);

  LiouvillianSpec tall = spec;
  tall.dims.fock_dim = 17;
  CHECK_THROWS_AS(evolve_exact(tall, vacuum_state(tall.dims, {1}), 0.0, 1.0), OracleError);
}

TEST_CASE("state constructors produce physical density matrices") {
  SystemDims dims{4, 2, 3};

  SUBCASE("random states are normalized, Hermitian, positive, reproducible") {
    Matrix r1 = random_density(dims, 7);
    Matrix r2 = random_density(dims, 7);
    Matrix r3 = random_density(dims, 8);
    CHECK((r1 - r2).norm() == 0.0);
    CHECK((r1 - r3).norm() > 1e-3);
    for (const Matrix& r : {r1, r3}) {
      CHECK(std::abs(r.trace() - cplx(1.0)) < 1e-12);
      CHECK((r - r.adjoint()).norm() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Matrix> es(r);
      CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
  }

  SUBCASE("vacuum state is the pure product it names") {
    Matrix v = vacuum_state(dims, {3, 2});
    CHECK(std::abs(v.trace() - cplx(1.0)) < 1e-14);
    CHECK((v * v - v).norm() < 1e-14);
    OperatorExpr p3_1 = product({transition(1, 3, 3)});
    OperatorExpr p2_2 = product({transition(2, 2, 2)});
    OperatorExpr photons = product({boson_create(), boson_annihilate()});
    auto z = moments(v, {p3_1, p2_2, photons}, dims, {}, 0.0);
    CHECK(std::abs(z[0] - cplx(1.0)) < 1e-14);
    CHECK(std::abs(z[1] - cplx(1.0)) < 1e-14);
    CHECK(std::abs(z[2]) < 1e-14);
  }
}
