#include <catch2/catch_amalgamated.hpp>

#include "twinlat/master_equation.hpp"
#include "twinlat/mean_field.hpp"
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

MeanFieldProblem make_problem(const AtomSystem& sys, double rabi, Direction dir) {
  const CouplingMatrices cm = coupling_matrices(sys);
  return MeanFieldProblem(sys, cm, drive_vector(sys, rabi, dir));
}

double bloch_norm(const MeanFieldState& s, int j) {
  return 4.0 * std::norm(s.sigma(j)) + s.sigma_z(j) * s.sigma_z(j);
}

}  // namespace

TEST_CASE("single atom factorised equations match the closed form", "[mean_field]") {
  // one atom has no cross terms, so the factorised equations are exact
  for (double om : {0.05, 0.5, 2.0}) {
    for (double delta : {0.0, 0.8, -1.5}) {
      const AtomSystem sys = single_atom_system(delta);
      const MeanFieldResult r = integrate_to_steady(make_problem(sys, om, Direction::forward),
                                                    1e-12, 5000.0, 1e-12);
      const SingleAtomReference ref = single_atom_reference(om, delta);
      CHECK(std::abs(r.state.sigma(0) - ref.sigma) < 1e-8);
      CHECK(r.state.sigma_z(0) == Approx(ref.sigma_z).margin(1e-8));
      CHECK(r.converged);
      CHECK(r.residual < 1e-12);
    }
  }
}

TEST_CASE("undriven ground state is a fixed point", "[mean_field]") {
  const AtomSystem sys = reference_dimer();
  MeanFieldState ground;
  ground.sigma = Eigen::VectorXcd::Zero(4);
  ground.sigma_z = Eigen::VectorXd::Constant(4, -1.0);
  const MeanFieldState d = mean_field_rhs(make_problem(sys, 0.0, Direction::forward), ground);
  CHECK(d.sigma.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.sigma_z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weak drive: quantum, factorised, and linear solvers agree", "[mean_field]") {
  const AtomSystem sys = reference_dimer();
  const double om = 1e-3;
  const CouplingMatrices cm = coupling_matrices(sys);
  const Eigen::VectorXcd drv = drive_vector(sys, om, Direction::forward);

  const DensityMatrix dm = steady_state(build_liouvillian(sys, om, Direction::forward));
  const Eigen::VectorXcd s_q = expectation_sigma(dm);
  const Eigen::VectorXcd s_m =
      integrate_to_steady(MeanFieldProblem(sys, cm, drv), 1e-10).state.sigma;
  const Eigen::VectorXcd s_l = linear_dipole_solve(sys, drv);

  const double sq = total_cross_section(sys, s_q, Direction::forward, om);
  const double sm = total_cross_section(sys, s_m, Direction::forward, om);
  const double sl = total_cross_section(sys, s_l, Direction::forward, om);
  CHECK(std::abs(sq - sm) / sq < 1e-3);
  CHECK(std::abs(sq - sl) / sq < 1e-3);
  CHECK(std::abs(sm - sl) / sm < 1e-3);
  // amplitudes agree atom by atom as well
  CHECK((s_q - s_m).cwiseAbs().maxCoeff() / s_q.cwiseAbs().maxCoeff() < 1e-3);
  CHECK((s_q - s_l).cwiseAbs().maxCoeff() / s_q.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("trajectories stay inside the bloch ball", "[mean_field]") {
  const AtomSystem sys = reference_dimer();
  const MeanFieldProblem p = make_problem(sys, 1.2, Direction::backward);
  const int n = 4;
  Eigen::VectorXcd y(2 * n);
  y.head(n).setZero();
  y.tail(n).setConstant(cd{-1.0, 0.0});
  auto rhs = [&p, n](const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
    MeanFieldState s;
    s.sigma = v.head(n);
    s.sigma_z = v.tail(n).real();
    const MeanFieldState d = mean_field_rhs(p, s);
    dv.resize(2 * n);
    dv.head(n) = d.sigma;
    dv.tail(n) = d.sigma_z.cast<cd>();
  };
  double t = 0.0;
  for (int w = 0; w < 40; ++w) {
    integrate_adaptive_rkck(rhs, y, t, t + 0.5, 1e-3, 1e-10, 1e-10);
    t += 0.5;
    MeanFieldState s;
    s.sigma = y.head(n);
    s.sigma_z = y.tail(n).real();
    for (int j = 0; j < n; ++j) CHECK(bloch_norm(s, j) < 1.0 + 1e-9);
  }
  // steady states across powers respect the same bound
  for (double om : {0.1, 0.5, 2.0}) {
    const MeanFieldState s =
        integrate_to_steady(make_problem(sys, om, Direction::forward)).state;
    for (int j = 0; j < n; ++j) CHECK(bloch_norm(s, j) < 1.0 + 1e-9);
  }
}

TEST_CASE("phase statistics over an array", "[mean_field]") {
  Eigen::VectorXcd sigma(5);
  Eigen::VectorXi idx(5);
  const double base = 2.0;
  sigma << std::polar(0.3, base - 0.2), std::polar(1.0, base), std::polar(0.5, base + 0.2),
      std::polar(0.4, -1.0), 1e-14 * cd{1.0, 0.0};
  idx << 1, 1, 1, 2, 2;

  const PhaseStats a1 = phase_statistics(sigma, idx, 1);
  CHECK(a1.count == 3);
  CHECK(a1.excluded == 0);
  CHECK(a1.mean_phase == Approx(base).margin(1e-12));
  CHECK(a1.variance == Approx((0.04 + 0.04) / 3.0).margin(1e-12));
  CHECK(a1.circ_variance > 0.0);

  // the tiny amplitude carries no phase and is dropped from array 2
  const PhaseStats a2 = phase_statistics(sigma, idx, 2);
  CHECK(a2.count == 1);
  CHECK(a2.excluded == 1);
  CHECK(a2.mean_phase == Approx(-1.0).margin(1e-12));
  CHECK(a2.variance == Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(phase_statistics(sigma, idx, 3), config_error);
  Eigen::VectorXcd dead = Eigen::VectorXcd::Constant(2, 1e-14);
  Eigen::VectorXi didx = Eigen::VectorXi::Ones(2);
  CHECK_THROWS_AS(phase_statistics(dead, didx, 1), solver_error);
}

TEST_CASE("mean phase wraps correctly near the branch cut", "[mean_field]") {
  Eigen::VectorXcd sigma(2);
  Eigen::VectorXi idx = Eigen::VectorXi::Ones(2);
  sigma << std::polar(1.0, pi - 0.1), std::polar(1.0, -pi + 0.1);
  const PhaseStats st = phase_statistics(sigma, idx, 1);
  CHECK(std::abs(std::remainder(st.mean_phase - pi, 2.0 * pi)) < 1e-12);
  CHECK(st.variance == Approx(0.01).margin(1e-12));
}

TEST_CASE("missing fixed point is reported, not returned", "[mean_field]") {
  const AtomSystem sys = reference_dimer();
  const MeanFieldProblem p = make_problem(sys, 1.0, Direction::forward);
  try {
    integrate_to_steady(p, 1e-16, 40.0, 1e-10);
    FAIL("expected solver_error");
  } catch (const solver_error& e) {
    CHECK(std::string(e.what()).find("possible limit cycle") != std::string::npos);
  }
}
