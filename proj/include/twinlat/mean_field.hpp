#pragma once

#include <cmath>
#include <cstdio>

#include <Eigen/LU>

#include "twinlat/coupling.hpp"
#include "twinlat/ode.hpp"
#include "twinlat/spectral.hpp"

namespace twinlat {

struct MeanFieldState {
  Eigen::VectorXcd sigma;
  Eigen::VectorXd sigma_z;
};

// factorised heisenberg equations for <sigma_k>, <sigma_k^z>:
//   d sigma_k = (-i Delta_k - Gamma_kk/2) sigma_k
//               + sigma_k^z sum_{j != k} (i Omega_kj + Gamma_kj/2) sigma_j
//               - i drive_k sigma_k^z
//   d sigma_k^z = -Gamma_kk (sigma_k^z + 1)
//                 - 4 sum_{j != k} Re[(i Omega_kj + Gamma_kj/2) conj(sigma_k) sigma_j]
//                 + 4 Im[conj(drive_k) sigma_k]
struct MeanFieldProblem {
  Eigen::VectorXd detunings;
  Eigen::MatrixXcd k;        // i Omega + Gamma/2 with zero diagonal
  Eigen::VectorXd gamma_self;
  Eigen::VectorXcd drive;

  MeanFieldProblem(const AtomSystem& sys, const CouplingMatrices& cm,
                   const Eigen::VectorXcd& drv)
      : detunings(sys.detunings), drive(drv) {
    const int n = sys.n_total;
    k = iu * cm.omega.cast<cd>() + 0.5 * cm.gamma.cast<cd>();
    k.diagonal().setZero();
    gamma_self = cm.gamma.diagonal();
  }
};

inline MeanFieldState mean_field_rhs(const MeanFieldProblem& p, const MeanFieldState& s) {
  const Eigen::VectorXcd coupled = p.k * s.sigma;
  MeanFieldState d;
  d.sigma = ((-iu * p.detunings.array().cast<cd>() - 0.5 * p.gamma_self.array().cast<cd>()) *
                 s.sigma.array() +
             s.sigma_z.array().cast<cd>() * (coupled.array() - iu * p.drive.array()))
                .matrix();
  d.sigma_z = (-p.gamma_self.array() * (s.sigma_z.array() + 1.0) -
               4.0 * (s.sigma.conjugate().array() * coupled.array()).real() +
               4.0 * (p.drive.conjugate().array() * s.sigma.array()).imag())
                  .matrix();
  return d;
}

struct MeanFieldResult {
  MeanFieldState state;
  double t_final = 0.0;
  double residual = 0.0;
  bool converged = false;
  long steps = 0;
};

// adaptive integration from all atoms in the ground state until the
// right-hand side drops below tol (inf-norm, units of gamma0)
inline MeanFieldResult integrate_to_steady(const MeanFieldProblem& p, double tol = 1e-8,
                                           double t_max = 5000.0, double ode_tol = 1e-10) {
  const int n = static_cast<int>(p.detunings.size());
  // packed state [sigma; sigma_z] as one complex vector for the stepper
  Eigen::VectorXcd y(2 * n);
  y.head(n).setZero();
  y.tail(n).setConstant(cd{-1.0, 0.0});

  auto unpack = [n](const Eigen::VectorXcd& v) {
    MeanFieldState s;
    s.sigma = v.head(n);
    s.sigma_z = v.tail(n).real();
    return s;
  };
  auto rhs = [&p, n, &unpack](const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
    const MeanFieldState d = mean_field_rhs(p, unpack(v));
    dv.resize(2 * n);
    dv.head(n) = d.sigma;
    dv.tail(n) = d.sigma_z.cast<cd>();
  };

  MeanFieldResult r;
  double t = 0.0;
  const double window = 20.0;
  Eigen::VectorXcd dy(2 * n);
  while (t < t_max) {
    const OdeStats st = integrate_adaptive_rkck(rhs, y, t, t + window, 1e-3, ode_tol, ode_tol);
    t += window;
    r.steps += st.steps;
    rhs(y, dy);
    r.residual = dy.cwiseAbs().maxCoeff();
    if (r.residual < tol) {
      r.converged = true;
      break;
    }
  }
  r.t_final = t;
  r.state = unpack(y);
  if (!r.converged) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "integrate_to_steady: residual %.3e after t = %g (tol %.3e); "
                  "no fixed point reached, possible limit cycle",
                  r.residual, t, tol);
    throw solver_error(buf);
  }
  return r;
}

// classical coupled-dipole amplitudes in the linear regime (sigma_z = -1):
// H_single sigma = drive with the single-excitation effective hamiltonian
inline Eigen::VectorXcd linear_dipole_solve(const AtomSystem& sys, const Eigen::VectorXcd& drive) {
  const EffectiveHamiltonian h = effective_hamiltonian(sys, Subspace::single_excitation);
  return h.matrix.partialPivLu().solve(drive);
}

struct PhaseStats {
  double mean_phase = 0.0;   // circular mean, in (-pi, pi]
  double variance = 0.0;     // plain variance of phases unwrapped around the mean
  double circ_variance = 0.0; // 1 - |mean resultant|
  int count = 0;
  int excluded = 0;          // atoms with |sigma| < 1e-12, left out of the stats
};

// statistics of arg(sigma_j) over the atoms of one array; amplitudes below
// 1e-12 carry no usable phase and are excluded (count reported)
inline PhaseStats phase_statistics(const Eigen::VectorXcd& sigma,
                                   const Eigen::VectorXi& array_index, int which_array) {
  PhaseStats st;
  cd resultant{0.0, 0.0};
  int in_array = 0;
  for (Eigen::Index j = 0; j < sigma.size(); ++j)
    if (array_index(j) == which_array) {
      ++in_array;
      if (std::abs(sigma(j)) < 1e-12) {
        ++st.excluded;
        continue;
      }
      resultant += sigma(j) / std::abs(sigma(j));
      ++st.count;
    }
  if (in_array == 0) throw config_error("phase_statistics: no atoms in the requested array");
  if (st.count == 0)
    throw solver_error("phase_statistics: all amplitudes below 1e-12, no phases to average");
  st.mean_phase = std::arg(resultant);
  st.circ_variance = 1.0 - std::abs(resultant) / st.count;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < sigma.size(); ++j)
    if (array_index(j) == which_array && std::abs(sigma(j)) >= 1e-12) {
      double d = std::arg(sigma(j)) - st.mean_phase;
      while (d > pi) d -= 2.0 * pi;
      while (d <= -pi) d += 2.0 * pi;
      acc += d * d;
    }
  st.variance = acc / st.count;
  return st;
}

}  // namespace twinlat
