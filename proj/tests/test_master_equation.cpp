#include <catch2/catch_amalgamated.hpp>

#include "twinlat/master_equation.hpp"
#include "twinlat/scattering.hpp"

using namespace twinlat;
using Catch::Approx;

namespace {

AtomSystem reference_dimer() {
  SystemConfig c;
  c.dimer_mode = true;
  c.a1 = 1.0 / 3.0;
  c.delta_a = 0.1;
  c.L = 0.1;
  c.delta_half = -1.0;
  return build_system(c);
}

void check_density(const DensityMatrix& dm, double tol = 1e-8) {
  CHECK(std::abs(dm.rho.trace() - cd(1.0)) < tol);
  CHECK((dm.rho - dm.rho.adjoint()).cwiseAbs().maxCoeff() < tol);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dm.rho);
  CHECK(es.eigenvalues().minCoeff() > -tol);
}

}  // namespace

TEST_CASE("single atom steady state equals the closed form", "[master_equation]") {
  for (double om : {0.01, 0.5, 1.0, 5.0}) {
    for (double delta : {0.0, 1.0, -1.0}) {
      const AtomSystem sys = single_atom_system(delta);
      const DensityMatrix dm = steady_state(build_liouvillian(sys, om, Direction::forward));
      const SingleAtomReference ref = single_atom_reference(om, delta);
      // excited population, coherence, inversion
      CHECK(dm.rho(1, 1).real() == Approx(ref.rho_ee).epsilon(1e-9));
      const cd s = expectation_sigma(dm)(0);
      CHECK(std::abs(s - ref.sigma) < 1e-9);
      CHECK(expectation_sigma_z(dm)(0) == Approx(ref.sigma_z).margin(1e-9));
      check_density(dm, 1e-10);
    }
  }
}

TEST_CASE("reference pair steady states, frozen numbers", "[master_equation]") {
  // independently verified against a dense liouvillian built in numpy
  const AtomSystem sys = reference_dimer();
  const DensityMatrix rf = steady_state(build_liouvillian(sys, 0.5, Direction::forward));
  const DensityMatrix rb = steady_state(build_liouvillian(sys, 0.5, Direction::backward));

  CHECK(rf.rho(0, 0).real() == Approx(0.269195).margin(2e-5));
  CHECK(rb.rho(0, 0).real() == Approx(0.634550).margin(2e-5));
  CHECK(von_neumann_entropy(rf) == Approx(1.216252).margin(2e-5));
  CHECK(von_neumann_entropy(rb) == Approx(0.387749).margin(2e-5));
  check_density(rf);
  check_density(rb);

  // the steady state is stationary under further evolution
  const DensityMatrix later = evolve(build_liouvillian(sys, 0.5, Direction::forward), rf, 5.0);
  CHECK((later.rho - rf.rho).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("evolution from the ground state conserves the dynamics", "[master_equation]") {
  const AtomSystem sys = reference_dimer();
  const Liouvillian l = build_liouvillian(sys, 0.7, Direction::forward);
  DensityMatrix dm;
  dm.rho = ground_state_density(4);
  for (double t : {0.5, 1.0, 3.0}) {
    dm = evolve(l, dm, t);
    check_density(dm, 1e-7);
  }
  // long-time evolution lands on the steady state
  dm = evolve(l, dm, 60.0);
  const DensityMatrix ss = steady_state(l);
  CHECK((dm.rho - ss.rho).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("weak drive responds reciprocally", "[master_equation]") {
  const AtomSystem sys = reference_dimer();
  const double om = 1e-3;
  const DensityMatrix rf = steady_state(build_liouvillian(sys, om, Direction::forward));
  const DensityMatrix rb = steady_state(build_liouvillian(sys, om, Direction::backward));
  const double sf = total_cross_section(sys, expectation_sigma(rf), Direction::forward, om);
  const double sb = total_cross_section(sys, expectation_sigma(rb), Direction::backward, om);
  CHECK(std::abs(sf - sb) / sf < 1e-3);
}

TEST_CASE("entropy of pure and mixed states", "[master_equation]") {
  DensityMatrix pure;
  pure.rho = Eigen::MatrixXcd::Zero(4, 4);
  pure.rho(0, 0) = 1.0;
  CHECK(von_neumann_entropy(pure) == Approx(0.0).margin(1e-12));

  DensityMatrix mixed;
  mixed.rho = Eigen::MatrixXcd::Identity(4, 4) / 4.0;
  CHECK(von_neumann_entropy(mixed) == Approx(std::log(4.0)).epsilon(1e-12));

  // strong saturation drives the reference pair towards maximal mixing
  const AtomSystem sys = reference_dimer();
  const DensityMatrix hot = steady_state(build_liouvillian(sys, 20.0, Direction::forward));
  CHECK(von_neumann_entropy(hot) > 0.98 * std::log(16.0));
  CHECK(expectation_sigma_z(hot).minCoeff() > -0.05);
}

TEST_CASE("trapped-mode weight in the product basis", "[master_equation]") {
  const AtomSystem sys = reference_dimer();
  const auto modes = eigenmodes(effective_hamiltonian(sys));
  const Eigen::VectorXcd dark = modes[classify_dark_bright(modes).dark].vector;

  // ground state carries no excited-mode weight
  DensityMatrix g;
  g.rho = ground_state_density(4);
  CHECK(dark_state_population(g, dark) == Approx(0.0).margin(1e-14));

  // a pure embedded mode carries weight one
  const Eigen::VectorXcd psi = embed_single_excitation(dark);
  DensityMatrix pd;
  pd.rho = psi * psi.adjoint();
  CHECK(dark_state_population(pd, dark) == Approx(1.0).epsilon(1e-12));

  // frozen values for the driven steady states
  const DensityMatrix rf = steady_state(build_liouvillian(sys, 0.5, Direction::forward));
  const DensityMatrix rb = steady_state(build_liouvillian(sys, 0.5, Direction::backward));
  CHECK(dark_state_population(rf, dark) == Approx(0.0599).margin(2e-3));
  CHECK(dark_state_population(rb, dark) == Approx(0.0134).margin(2e-3));
}

TEST_CASE("drive-dressed modes expose the trapped branch", "[master_equation]") {
  const AtomSystem sys = reference_dimer();

  // zero drive: the dressed ground branch is the bare ground state
  const auto undriven = driven_eigenmodes(sys, 0.0, Direction::forward);
  const int g0 = dressed_ground_index(undriven);
  CHECK(std::abs(undriven[g0].vector(0)) == Approx(1.0));
  CHECK(undriven[g0].decay_rate == Approx(0.0).margin(1e-12));

  // driven: the trapped-mode decay rises from the bare value ~0.28 at weak
  // drive towards ~0.6 near the asymmetry peak
  for (double om : {0.3, 0.515, 0.7125, 2.0}) {
    const auto modes = driven_eigenmodes(sys, om, Direction::forward);
    const int dg = dressed_ground_index(modes);
    const int dk = driven_dark_index(modes);
    REQUIRE(dg != dk);
    CHECK(modes[dk].decay_rate > 0.25);
    CHECK(modes[dk].decay_rate < 0.75);
  }
  const auto at_peak = driven_eigenmodes(sys, 0.515, Direction::forward);
  CHECK(at_peak[driven_dark_index(at_peak)].decay_rate == Approx(0.5965).margin(5e-4));
  const auto at_m_peak = driven_eigenmodes(sys, 0.7125, Direction::forward);
  const double gd = at_m_peak[driven_dark_index(at_m_peak)].decay_rate;
  CHECK(gd > 0.54);
  CHECK(gd < 0.66);
}

TEST_CASE("dual-basis projection separates the two drive directions", "[master_equation]") {
  // the asymmetry diagnostic: project each steady state on the eigenmodes of
  // its own drive-dressed hamiltonian; the trapped mode holds half the weight
  // one way and almost none the other way
  const AtomSystem sys = reference_dimer();
  for (const auto& [om, want_f, want_b] :
       {std::tuple{0.515, 0.5174, 0.0260}, std::tuple{0.7125, 0.5205, 0.0636}}) {
    const auto mf = driven_eigenmodes(sys, om, Direction::forward);
    const auto mb = driven_eigenmodes(sys, om, Direction::backward);
    const DensityMatrix rf = steady_state(build_liouvillian(sys, om, Direction::forward));
    const DensityMatrix rb = steady_state(build_liouvillian(sys, om, Direction::backward));
    const double cf = to_eigenbasis(rf, mf).rho(driven_dark_index(mf), driven_dark_index(mf)).real();
    const double cb = to_eigenbasis(rb, mb).rho(driven_dark_index(mb), driven_dark_index(mb)).real();
    CHECK(cf == Approx(want_f).margin(2e-3));
    CHECK(cb == Approx(want_b).margin(2e-3));
  }
}

TEST_CASE("eigenbasis transform round trips", "[master_equation]") {
  const AtomSystem sys = reference_dimer();
  const auto modes = driven_eigenmodes(sys, 0.5, Direction::forward);
  const DensityMatrix rf = steady_state(build_liouvillian(sys, 0.5, Direction::forward));
  const DensityMatrix tf = to_eigenbasis(rf, modes);
  REQUIRE(tf.basis == Basis::eigen);
  // reconstruct rho = V rho_eigen V^dagger
  Eigen::MatrixXcd v(16, 16);
  for (int i = 0; i < 16; ++i) v.col(i) = modes[i].vector;
  const Eigen::MatrixXcd back = v * tf.rho * v.adjoint();
  CHECK((back - rf.rho).cwiseAbs().maxCoeff() < 1e-8);
  // hermiticity survives the congruence
  CHECK((tf.rho - tf.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("direct correlator measurements", "[master_equation]") {
  const AtomSystem sys = reference_dimer();
  const DensityMatrix dm = steady_state(build_liouvillian(sys, 0.8, Direction::forward));
  const Eigen::MatrixXcd c = sigma_correlations(dm);
  REQUIRE(c.rows() == 4);
  // diagonal holds excited populations: consistent with sigma_z
  const Eigen::VectorXd sz = expectation_sigma_z(dm);
  for (int j = 0; j < 4; ++j) {
    CHECK(c(j, j).imag() == Approx(0.0).margin(1e-12));
    CHECK(2 * c(j, j).real() - 1 == Approx(sz(j)).margin(1e-10));
  }
  CHECK((c - c.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solvers refuse out-of-range systems", "[master_equation]") {
  AtomSystem big;
  const int n = max_quantum_atoms + 1;
  big.n_total = n;
  big.positions.resize(n, 3);
  for (int i = 0; i < n; ++i) big.positions.row(i) << 0.4 * i, 0, 0;
  big.detunings = Eigen::VectorXd::Zero(n);
  big.array_index = Eigen::VectorXi::Ones(n);
  CHECK_THROWS_AS(build_liouvillian(big, 0.5, Direction::forward), config_error);
}
