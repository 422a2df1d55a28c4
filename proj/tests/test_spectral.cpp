#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "twinlat/spectral.hpp"

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

}  // namespace

TEST_CASE("dimer pair collective modes", "[spectral]") {
  // frozen against an independent dense-liouvillian diagonalisation
  const auto modes = eigenmodes(effective_hamiltonian(reference_dimer()));
  REQUIRE(modes.size() == 4);

  CHECK(modes[0].decay_rate == Approx(0.282553).margin(2e-6));
  CHECK(modes[1].decay_rate == Approx(0.287029).margin(2e-6));
  CHECK(modes[2].decay_rate == Approx(0.662537).margin(2e-6));
  CHECK(modes[3].decay_rate == Approx(2.767880).margin(2e-6));

  CHECK(modes[0].energy.real() == Approx(-0.607420).margin(2e-6));
  CHECK(modes[1].energy.real() == Approx(-0.542522).margin(2e-6));
  CHECK(modes[2].energy.real() == Approx(0.836337).margin(2e-6));
  CHECK(modes[3].energy.real() == Approx(0.313604).margin(2e-6));

  // sorted by decay rate, vectors normalised
  for (std::size_t i = 1; i < modes.size(); ++i)
    CHECK(modes[i].decay_rate >= modes[i - 1].decay_rate);
  for (const auto& m : modes) CHECK(m.vector.norm() == Approx(1.0));

  const DarkBright db = classify_dark_bright(modes);
  CHECK(db.dark == 0);
  CHECK(db.bright == 3);
}

TEST_CASE("paired-array mode decay closed form", "[spectral]") {
  // single open diffraction order, pitch below the wavelength:
  //   gamma(q=0, p) = 3 pi / (k a)^2 (1 + p cos k L)
  const Eigen::Vector2d q0(0.0, 0.0);

  // half-wavelength separation: even mode switches off entirely and the odd
  // mode carries twice the single-order weight, 6 pi / (k a)^2 = 24 / pi at a = 1/4
  CHECK(infinite_lattice_decay(0.25, 0.5, q0, 1) == 0.0);
  CHECK(infinite_lattice_decay(0.25, 0.5, q0, -1) == Approx(24.0 / pi).epsilon(1e-14));

  std::mt19937 rng(421);
  std::uniform_real_distribution<double> ua(0.06, 0.94), ul(0.05, 2.0);
  for (int i = 0; i < 50; ++i) {
    const double a = ua(rng), l = ul(rng);
    const double base = 3.0 * pi / (k0 * a * k0 * a);
    CHECK(infinite_lattice_decay(a, l, q0, 1) ==
          Approx(base * (1 + std::cos(k0 * l))).margin(1e-12 * base));
    CHECK(infinite_lattice_decay(a, l, q0, -1) ==
          Approx(base * (1 - std::cos(k0 * l))).margin(1e-12 * base));
  }

  // the parity-dependent part cancels in the sum, so it cannot depend on L
  for (int i = 0; i < 10; ++i) {
    const double a = ua(rng);
    const double l1 = ul(rng), l2 = ul(rng);
    const Eigen::Vector2d q(0.17 * i, 0.11);
    const double s1 = infinite_lattice_decay(a, l1, q, 1) + infinite_lattice_decay(a, l1, q, -1);
    const double s2 = infinite_lattice_decay(a, l2, q, 1) + infinite_lattice_decay(a, l2, q, -1);
    CHECK(s1 == Approx(s2).epsilon(1e-12));
  }
}

TEST_CASE("grazing diffraction orders are reported, not skipped", "[spectral]") {
  // pitch exactly one wavelength puts the (+-1, 0) orders on the light cone
  CHECK_THROWS_WITH(infinite_lattice_decay(1.0, 0.5, Eigen::Vector2d(0, 0), 1),
                    Catch::Matchers::ContainsSubstring("grazing"));
  CHECK_THROWS_AS(infinite_lattice_decay(1.0, 0.5, Eigen::Vector2d(0, 0), 1), solver_error);
  // argument validation
  CHECK_THROWS_AS(infinite_lattice_decay(0.25, 0.5, Eigen::Vector2d(0, 0), 0), config_error);
  CHECK_THROWS_AS(infinite_lattice_decay(-0.25, 0.5, Eigen::Vector2d(0, 0), 1), config_error);
  CHECK_THROWS_AS(infinite_lattice_decay(0.25, 0.0, Eigen::Vector2d(0, 0), 1), config_error);
}

TEST_CASE("bloch ansatz structure", "[spectral]") {
  SystemConfig c;
  c.n_perp = 4;
  c.a1 = 0.25;
  c.L = 0.6;
  const AtomSystem sys = build_system(c);

  const Eigen::VectorXcd even = bloch_state(sys, Eigen::Vector2d(0, 0), 1);
  const Eigen::VectorXcd odd = bloch_state(sys, Eigen::Vector2d(0, 0), -1);
  CHECK(even.norm() == Approx(1.0));
  CHECK(odd.norm() == Approx(1.0));
  const int half = sys.n_total / 2;
  for (int j = 0; j < half; ++j) {
    CHECK(even(j) == even(half + j));
    CHECK(odd(j) == -odd(half + j));  // parity factor flips the second array
  }

  // mismatched in-plane lattices have no common bloch label
  SystemConfig bad = c;
  bad.delta_a = 0.05;
  CHECK_THROWS_AS(bloch_state(build_system(bad), Eigen::Vector2d(0, 0), 1), config_error);
}

TEST_CASE("wide mirror pair: dark mode lives at the zone corner", "[spectral]") {
  SystemConfig c;
  c.n_perp = 10;
  c.a1 = 0.25;
  c.L = 0.6;
  const AtomSystem sys = build_system(c);
  const auto modes = eigenmodes(effective_hamiltonian(sys));
  const DarkBright db = classify_dark_bright(modes);

  // frozen classification values
  CHECK(modes[db.dark].decay_rate == Approx(7.1546e-6).epsilon(1e-3));
  CHECK(modes[db.bright].decay_rate == Approx(8.4653).epsilon(1e-3));

  // the finite-array dark mode is a checkerboard pattern: large overlap with
  // the zone-corner bloch ansatz, none with the uniform one
  const double ac = 0.25;
  const Eigen::VectorXcd corner = bloch_state(sys, Eigen::Vector2d(pi / ac, pi / ac), 1);
  const Eigen::VectorXcd uniform_p = bloch_state(sys, Eigen::Vector2d(0, 0), 1);
  const Eigen::VectorXcd uniform_m = bloch_state(sys, Eigen::Vector2d(0, 0), -1);
  CHECK(std::abs(corner.dot(modes[db.dark].vector)) > 0.5);
  CHECK(std::abs(uniform_p.dot(modes[db.dark].vector)) < 0.1);
  CHECK(std::abs(uniform_m.dot(modes[db.dark].vector)) < 0.1);
}

TEST_CASE("dark-mode decay shrinks with array size as a power law", "[spectral]") {
  const ScalingResult r = darkstate_scaling(0.25, 0.6, {4, 6, 8});
  REQUIRE(r.gamma_dark.size() == 3);
  for (std::size_t i = 1; i < r.gamma_dark.size(); ++i)
    CHECK(r.gamma_dark[i] < r.gamma_dark[i - 1]);
  CHECK(r.alpha > 2.0);
  CHECK(r.alpha < 3.2);
  CHECK(r.n_atoms[0] == 32);

  CHECK_THROWS_AS(darkstate_scaling(0.25, 0.6, {4, 6}), config_error);
}

TEST_CASE("power-law fit recovers exact slopes", "[spectral]") {
  std::vector<int> n{10, 40, 90, 250};
  std::vector<double> g;
  for (int v : n) g.push_back(3.7 * std::pow(v, -2.25));
  CHECK(fit_power_law_exponent(n, g) == Approx(2.25).epsilon(1e-12));
  CHECK_THROWS_AS(fit_power_law_exponent({10, 20}, {1.0, -0.5}), config_error);
}

TEST_CASE("full product-space modes and the size guard", "[spectral]") {
  const AtomSystem sys = reference_dimer();
  const auto full = eigenmodes(effective_hamiltonian(sys, Subspace::full));
  REQUIRE(full.size() == 16);
  // undriven product space contains the exact ground state at zero energy
  CHECK(full[0].decay_rate == Approx(0.0).margin(1e-12));
  CHECK(std::abs(full[0].energy) < 1e-12);
  // and reproduces the single-excitation block
  const auto single = eigenmodes(effective_hamiltonian(sys));
  for (const auto& m : single) {
    double best = 1e9;
    for (const auto& f : full) best = std::min(best, std::abs(f.energy - m.energy));
    CHECK(best < 1e-9);
  }

  AtomSystem big;
  big.n_total = 13;
  big.positions.resize(13, 3);
  for (int i = 0; i < 13; ++i) big.positions.row(i) << 0.3 * i, 0, 0;
  big.detunings = Eigen::VectorXd::Zero(13);
  big.array_index = Eigen::VectorXi::Ones(13);
  CHECK_THROWS_AS(effective_hamiltonian(big, Subspace::full), config_error);
}

