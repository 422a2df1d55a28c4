#pragma once

#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "twinlat/coupling.hpp"
#include "twinlat/ode.hpp"
#include "twinlat/operators.hpp"
#include "twinlat/spectral.hpp"

namespace twinlat {

enum class Basis { product, eigen };

struct DensityMatrix {
  Eigen::MatrixXcd rho;
  Basis basis = Basis::product;
};

inline constexpr int max_quantum_atoms = 10;  // 2^10 x 2^10 density matrices
inline constexpr int dense_superop_atoms = 6; // dense 4^N superoperator up to here

// lindblad generator for the driven pair system.  the dense column-stacked
// superoperator is kept for small systems (direct null-space solves); the
// matrix-free pieces are always kept and drive the time integrator.
struct Liouvillian {
  int n_atoms = 0;
  Direction drive_direction = Direction::forward;
  Eigen::MatrixXcd superop;        // dense, only for n_atoms <= dense_superop_atoms
  SpMat h_nh;                      // H_S - (i/2) sum Gamma_jk sigma_j^+ sigma_k, drive included
  SpMat h_nh_adj;
  Eigen::MatrixXd gamma;           // jump-rate matrix
  std::vector<SpMat> sig;          // lowering operator per atom
  std::vector<SpMat> sig_adj;
  bool has_dense = false;
};

namespace detail {
// accumulate coeff * vec(A rho B) contributions into the dense superoperator:
// vec(A rho B) = (B^T kron A) vec(rho), column-major stacking
inline void add_sandwich(Eigen::MatrixXcd& l, const SpMat& a, const SpMat& b, cd coeff) {
  const Eigen::Index d = a.rows();
  for (int bo = 0; bo < b.outerSize(); ++bo)
    for (SpMat::InnerIterator bi(b, bo); bi; ++bi)       // b(row=c, col=c')
      for (int ao = 0; ao < a.outerSize(); ++ao)
        for (SpMat::InnerIterator ai(a, ao); ai; ++ai)   // a(row=r', col=r)
          l(bi.col() * d + ai.row(), bi.row() * d + ai.col()) += coeff * ai.value() * bi.value();
}

inline SpMat identity_sp(Eigen::Index d) {
  SpMat id(d, d);
  id.setIdentity();
  return id;
}
}  // namespace detail

inline Liouvillian build_liouvillian(const AtomSystem& sys, double rabi_amplitude,
                                     Direction dir, double frequency_offset = 0.0) {
  if (sys.n_total > max_quantum_atoms)
    throw config_error("quantum solver limited to 10 atoms; use the semiclassical solver");
  const AtomSystem shifted = with_frequency_offset(sys, frequency_offset);
  const CouplingMatrices cm = coupling_matrices(shifted);
  const Eigen::VectorXcd drv = drive_vector(shifted, rabi_amplitude, dir);
  const int n = shifted.n_total;

  Liouvillian l;
  l.n_atoms = n;
  l.drive_direction = dir;
  l.gamma = cm.gamma;

  Eigen::VectorXcd diag(n);
  Eigen::MatrixXcd w(n, n);
  for (int k = 0; k < n; ++k) {
    diag(k) = cd(shifted.detunings(k), -0.5 * cm.gamma(k, k));
    for (int j = 0; j < n; ++j)
      w(j, k) = (j == k) ? cd{} : cd(cm.omega(j, k), -0.5 * cm.gamma(j, k));
  }
  l.h_nh = hopping_hamiltonian(diag, w, drv);
  l.h_nh_adj = SpMat(l.h_nh.adjoint());
  l.sig.reserve(n);
  l.sig_adj.reserve(n);
  for (int j = 0; j < n; ++j) {
    l.sig.push_back(sigma_m(n, j));
    l.sig_adj.push_back(SpMat(l.sig.back().adjoint()));
  }

  if (n <= dense_superop_atoms) {
    const Eigen::Index d = hilbert_dim(n);
    const SpMat id = detail::identity_sp(d);
    l.superop = Eigen::MatrixXcd::Zero(d * d, d * d);
    detail::add_sandwich(l.superop, l.h_nh, id, -iu);
    detail::add_sandwich(l.superop, id, l.h_nh_adj, iu);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        detail::add_sandwich(l.superop, l.sig[j], l.sig_adj[i], cm.gamma(i, j));
    l.has_dense = true;
  }
  return l;
}

// matrix-free action rho -> drho/dt, valid for every n_atoms
inline void apply_liouvillian(const Liouvillian& l, const Eigen::MatrixXcd& rho,
                              Eigen::MatrixXcd& out) {
  out = -iu * (l.h_nh * rho);
  out += iu * (rho * l.h_nh_adj);
  const int n = l.n_atoms;
  std::vector<Eigen::MatrixXcd> t(n);
  for (int j = 0; j < n; ++j) t[j] = l.sig[j] * rho;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXcd acc = l.gamma(i, 0) * t[0];
    for (int j = 1; j < n; ++j) acc.noalias() += l.gamma(i, j) * t[j];
    out += acc * l.sig_adj[i];
  }
}

inline Eigen::MatrixXcd ground_state_density(int n_atoms) {
  const int d = hilbert_dim(n_atoms);
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
  rho(0, 0) = 1.0;
  return rho;
}

// time evolution with the adaptive stepper; trace and hermiticity are
// asserted on the result (the generator preserves both exactly)
inline DensityMatrix evolve(const Liouvillian& l, const DensityMatrix& rho0, double t,
                            double tol = 1e-10) {
  if (rho0.basis != Basis::product) throw config_error("evolve expects a product-basis state");
  DensityMatrix out;
  out.rho = rho0.rho;
  if (t > 0.0) {
    auto rhs = [&l](const Eigen::MatrixXcd& y, Eigen::MatrixXcd& dy) {
      apply_liouvillian(l, y, dy);
    };
    integrate_adaptive_rkck(rhs, out.rho, 0.0, t, 1e-3, tol, tol);
  }
  const double trace_err = std::abs(out.rho.trace() - cd{1.0, 0.0});
  const double herm_err = (out.rho - out.rho.adjoint()).cwiseAbs().maxCoeff();
  if (trace_err > 1e-8 || herm_err > 1e-8)
    throw solver_error("evolve: trace or hermiticity drift beyond 1e-8");
  return out;
}

struct SteadyOptions {
  double tol = 1e-9;       // residual target, ||L[rho]|| relative to ||L||
  double t_max = 5000.0;   // cap for the integration fallback (1/gamma0)
  double ode_tol = 1e-10;
};

// steady state: dense null-space solve for n <= dense_superop_atoms, long-time
// integration from the ground state above that
inline DensityMatrix steady_state(const Liouvillian& l, const SteadyOptions& opt = {}) {
  DensityMatrix dm;
  const int d = hilbert_dim(l.n_atoms);
  if (l.has_dense) {
    const Eigen::Index dd = static_cast<Eigen::Index>(d) * d;
    Eigen::MatrixXcd a = l.superop;
    // trace functional replaces the first row; diagonal of rho sits at c*(d+1)
    a.row(0).setZero();
    for (int c = 0; c < d; ++c) a(0, static_cast<Eigen::Index>(c) * (d + 1)) = 1.0;
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(dd);
    b(0) = 1.0;
    Eigen::VectorXcd x = a.partialPivLu().solve(b);

    const double lnorm = l.superop.norm();
    const double res = (l.superop * x).norm() / (lnorm * x.norm());
    if (!(res <= opt.tol)) {
      // diagnose a degenerate kernel before giving up
      Eigen::BDCSVD<Eigen::MatrixXcd> svd(l.superop, Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      int null_dim = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) < 1e-10 * sv(0)) ++null_dim;
      if (null_dim > 1)
        throw solver_error("steady_state: degenerate null space, dimension " +
                           std::to_string(null_dim));
      x = svd.matrixV().col(dd - 1);
      const cd tr = [&] {
        cd s{};
        for (int c = 0; c < d; ++c) s += x(static_cast<Eigen::Index>(c) * (d + 1));
        return s;
      }();
      if (std::abs(tr) < 1e-12) throw solver_error("steady_state: traceless null vector");
      x /= tr;
      const double res2 = (l.superop * x).norm() / (lnorm * x.norm());
      if (!(res2 <= opt.tol))
        throw solver_error("steady_state: null-space residual " + std::to_string(res2) +
                           " above tolerance");
    }
    dm.rho = Eigen::Map<Eigen::MatrixXcd>(x.data(), d, d);
  } else {
    // integrate from all atoms in the ground state until the generator residual dies
    Eigen::MatrixXcd rho = ground_state_density(l.n_atoms);
    Eigen::MatrixXcd drho(d, d);
    auto rhs = [&l](const Eigen::MatrixXcd& y, Eigen::MatrixXcd& dy) {
      apply_liouvillian(l, y, dy);
    };
    double t = 0.0;
    const double window = 25.0;
    double res = 0.0;
    while (t < opt.t_max) {
      integrate_adaptive_rkck(rhs, rho, t, t + window, 1e-3, opt.ode_tol, opt.ode_tol);
      t += window;
      apply_liouvillian(l, rho, drho);
      res = drho.norm();
      if (res < opt.tol * 10.0) break;  // absolute scale: rates are O(gamma0)
    }
    if (!(res < opt.tol * 10.0))
      throw solver_error("steady_state: integration residual " + std::to_string(res) +
                         " after t = " + std::to_string(t));
    dm.rho = rho;
  }
  // exact hermitisation + unit trace; then sanity-check positivity
  dm.rho = 0.5 * (dm.rho + dm.rho.adjoint()).eval();
  dm.rho /= dm.rho.trace().real();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dm.rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-9)
    throw solver_error("steady_state: density matrix not positive semidefinite");
  return dm;
}

// <sigma_j> = sum over basis states with atom j excited of rho(b, b without j)
inline Eigen::VectorXcd expectation_sigma(const DensityMatrix& dm) {
  if (dm.basis != Basis::product) throw config_error("expectation_sigma expects product basis");
  const int n = n_atoms_of(dm.rho.rows());
  const int d = hilbert_dim(n);
  Eigen::VectorXcd s = Eigen::VectorXcd::Zero(n);
  for (int j = 0; j < n; ++j)
    for (int b = 0; b < d; ++b)
      if (b & (1 << j)) s(j) += dm.rho(b, b ^ (1 << j));
  return s;
}

inline Eigen::VectorXd expectation_sigma_z(const DensityMatrix& dm) {
  if (dm.basis != Basis::product) throw config_error("expectation_sigma_z expects product basis");
  const int n = n_atoms_of(dm.rho.rows());
  const int d = hilbert_dim(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j)
    for (int b = 0; b < d; ++b)
      z(j) += ((b >> j) & 1 ? 1.0 : -1.0) * dm.rho(b, b).real();
  return z;
}

// two-point correlators <sigma_i^+ sigma_j>, used by intensity maps
inline Eigen::MatrixXcd sigma_correlations(const DensityMatrix& dm) {
  if (dm.basis != Basis::product) throw config_error("sigma_correlations expects product basis");
  const int n = n_atoms_of(dm.rho.rows());
  const int d = hilbert_dim(n);
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < d; ++b) {
        if (!(b & (1 << j))) continue;
        const int mid = b ^ (1 << j);
        if (mid & (1 << i)) continue;
        c(i, j) += dm.rho(b, mid | (1 << i));
      }
  return c;
}

// population of a single-excitation collective mode inside the full state
inline double dark_state_population(const DensityMatrix& dm, const Eigen::VectorXcd& mode) {
  if (dm.basis != Basis::product) throw config_error("dark_state_population expects product basis");
  const Eigen::VectorXcd psi = embed_single_excitation(mode);
  if (psi.size() != dm.rho.rows())
    throw config_error("dark_state_population: mode size does not match the state");
  const cd val = psi.adjoint() * dm.rho * psi;
  if (std::abs(val.imag()) > 1e-10)
    throw solver_error("dark_state_population: non-real overlap");
  return val.real();
}

inline double von_neumann_entropy(const DensityMatrix& dm) {
  Eigen::MatrixXcd h = 0.5 * (dm.rho + dm.rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-9) throw solver_error("von_neumann_entropy: negative eigenvalue");
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-14) s -= ev(i) * std::log(ev(i));
  return s;
}

// eigenmodes of the drive-included non-hermitian hamiltonian (the h_nh the
// liouvillian evolves with).  the drive mixes excitation sectors, so these
// are full product-space modes; the steady state concentrates on few of them.
inline std::vector<EigenMode> driven_eigenmodes(const AtomSystem& sys, double rabi_amplitude,
                                                Direction dir, double frequency_offset = 0.0) {
  const Liouvillian l = build_liouvillian(sys, rabi_amplitude, dir, frequency_offset);
  EffectiveHamiltonian h;
  h.matrix = Eigen::MatrixXcd(l.h_nh);
  h.subspace = Subspace::full;
  return eigenmodes(h);
}

// the dressed-ground branch: mode with the largest ground-state component
inline int dressed_ground_index(const std::vector<EigenMode>& modes) {
  if (modes.empty()) throw config_error("dressed_ground_index: empty mode list");
  int g = 0;
  for (int i = 1; i < static_cast<int>(modes.size()); ++i)
    if (std::abs(modes[i].vector(0)) > std::abs(modes[g].vector(0))) g = i;
  return g;
}

// operative dark state under drive: slowest-decaying mode that is not the
// dressed ground
inline int driven_dark_index(const std::vector<EigenMode>& modes) {
  const int g = dressed_ground_index(modes);
  int best = -1;
  for (int i = 0; i < static_cast<int>(modes.size()); ++i) {
    if (i == g) continue;
    if (best < 0 || modes[i].decay_rate < modes[best].decay_rate) best = i;
  }
  if (best < 0) throw config_error("driven_dark_index: needs at least two modes");
  return best;
}

// similarity transform into the right-eigenvector basis of the full
// effective hamiltonian: rho_tilde = V^-1 rho (V^-1)^dagger
inline DensityMatrix to_eigenbasis(const DensityMatrix& dm, const std::vector<EigenMode>& modes) {
  if (dm.basis != Basis::product) throw config_error("to_eigenbasis expects a product-basis state");
  const Eigen::Index d = dm.rho.rows();
  if (modes.size() != static_cast<size_t>(d))
    throw config_error("to_eigenbasis: mode count does not match the state dimension");
  Eigen::MatrixXcd v(d, d);
  for (Eigen::Index i = 0; i < d; ++i) v.col(i) = modes[i].vector;
  {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(v);
    const double cond = svd.singularValues()(0) / svd.singularValues()(d - 1);
    if (!(cond < 1e8))
      throw solver_error("to_eigenbasis: eigenbasis condition number " + std::to_string(cond));
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(v);
  const Eigen::MatrixXcd x = lu.solve(dm.rho);
  DensityMatrix out;
  out.rho = lu.solve(x.adjoint()).adjoint();
  out.basis = Basis::eigen;
  return out;
}

}  // namespace twinlat
