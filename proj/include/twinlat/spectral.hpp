#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "twinlat/coupling.hpp"
#include "twinlat/operators.hpp"

namespace twinlat {

enum class Subspace { single_excitation, full };

// undriven non-hermitian hamiltonian H_S - (i/2) sum_jk Gamma_jk sigma_j^+ sigma_k.
// single-excitation block: H(j,k) = Omega_jk - i Gamma_jk / 2 (j != k),
// H(j,j) = Delta_j - i gamma0 / 2.
struct EffectiveHamiltonian {
  Eigen::MatrixXcd matrix;
  Subspace subspace = Subspace::single_excitation;
};

inline constexpr int max_full_subspace_atoms = 12;

inline EffectiveHamiltonian effective_hamiltonian(const AtomSystem& sys,
                                                  Subspace sub = Subspace::single_excitation) {
  const CouplingMatrices cm = coupling_matrices(sys);
  const int n = sys.n_total;
  EffectiveHamiltonian h;
  h.subspace = sub;
  if (sub == Subspace::single_excitation) {
    h.matrix.resize(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        h.matrix(j, k) = (j == k) ? cd(sys.detunings(j), -0.5 * cm.gamma(j, j))
                                  : cd(cm.omega(j, k), -0.5 * cm.gamma(j, k));
  } else {
    if (n > max_full_subspace_atoms)
      throw config_error("full-subspace effective hamiltonian limited to 12 atoms");
    Eigen::VectorXcd diag(n);
    for (int k = 0; k < n; ++k) diag(k) = cd(sys.detunings(k), -0.5 * cm.gamma(k, k));
    Eigen::MatrixXcd w(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        w(j, k) = (j == k) ? cd{} : cd(cm.omega(j, k), -0.5 * cm.gamma(j, k));
    h.matrix = Eigen::MatrixXcd(hopping_hamiltonian(diag, w, Eigen::VectorXcd()));
  }
  return h;
}

// one collective mode: complex energy E_n, decay rate gamma_n = -2 Im E_n >= 0
struct EigenMode {
  cd energy;
  double decay_rate = 0.0;
  Eigen::VectorXcd vector;
};

inline std::vector<EigenMode> eigenmodes(const EffectiveHamiltonian& h) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h.matrix);
  if (es.info() != Eigen::Success) throw solver_error("eigenmodes: eigensolver failed");
  const auto n = h.matrix.rows();
  std::vector<EigenMode> modes(n);
  const double tol = 1e-12 * std::max(1.0, h.matrix.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    modes[i].energy = es.eigenvalues()(i);
    double g = -2.0 * modes[i].energy.imag();
    if (g < 0.0) {
      if (g < -std::max(tol, 1e-9)) throw solver_error("eigenmodes: negative decay rate beyond tolerance");
      g = 0.0;
    }
    modes[i].decay_rate = g;
    modes[i].vector = es.eigenvectors().col(i);
    modes[i].vector.normalize();
  }
  std::sort(modes.begin(), modes.end(), [](const EigenMode& a, const EigenMode& b) {
    if (a.decay_rate != b.decay_rate) return a.decay_rate < b.decay_rate;
    return a.energy.real() < b.energy.real();
  });
  return modes;
}

struct DarkBright {
  int dark = 0;    // index into the sorted mode list
  int bright = 0;
};

inline DarkBright classify_dark_bright(const std::vector<EigenMode>& modes) {
  if (modes.empty()) throw config_error("classify_dark_bright: empty mode list");
  DarkBright db;
  for (int i = 1; i < static_cast<int>(modes.size()); ++i) {
    const auto& m = modes[i];
    const auto& d = modes[db.dark];
    const auto& b = modes[db.bright];
    if (m.decay_rate < d.decay_rate ||
        (m.decay_rate == d.decay_rate && m.energy.real() < d.energy.real()))
      db.dark = i;
    if (m.decay_rate > b.decay_rate ||
        (m.decay_rate == b.decay_rate && m.energy.real() < b.energy.real()))
      db.bright = i;
  }
  return db;
}

// decay rate of the infinite-pair bloch mode (q, p) for identical square
// arrays with pitch a and separation L:
//   gamma(q, p) = 3 pi gamma0 / (k a)^2 *
//     sum_{|q - Q| < k} (k^2 - |(q - Q) . dhat|^2) / (k kz) * (1 + p cos(kz L)),
//   kz = sqrt(k^2 - |q - Q|^2),  Q in the reciprocal lattice.
inline double infinite_lattice_decay(double a, double L, const Eigen::Vector2d& q,
                                     int p, double k = k0) {
  if (p != 1 && p != -1) throw config_error("infinite_lattice_decay: parity must be +-1");
  if (!(a > 0.0) || !(L > 0.0)) throw config_error("infinite_lattice_decay: a and L must be positive");
  const double g = 2.0 * pi / a;
  // search windows widened slightly past the propagating rim so orders sitting
  // exactly at grazing are caught and reported instead of silently skipped
  const double pad = 1e-5 * k;
  const int m1_lo = static_cast<int>(std::ceil((q.x() - k - pad) / g));
  const int m1_hi = static_cast<int>(std::floor((q.x() + k + pad) / g));
  double sum = 0.0;
  for (int m1 = m1_lo; m1 <= m1_hi; ++m1) {
    const double qx = q.x() - m1 * g;
    const double rem = k * k - qx * qx;
    const double hw = std::sqrt(std::max(rem, 0.0));
    const int m2_lo = static_cast<int>(std::ceil((q.y() - hw - pad) / g));
    const int m2_hi = static_cast<int>(std::floor((q.y() + hw + pad) / g));
    for (int m2 = m2_lo; m2 <= m2_hi; ++m2) {
      const double qy = q.y() - m2 * g;
      const double kz2 = k * k - qx * qx - qy * qy;
      if (std::abs(kz2) < 1e-10 * k * k)
        throw solver_error("infinite_lattice_decay: diffraction order (" + std::to_string(m1) +
                           ", " + std::to_string(m2) + ") at grazing incidence");
      if (kz2 <= 0.0) continue;
      const double kz = std::sqrt(kz2);
      // dipoles along x: |(q - Q) . dhat|^2 = qx^2
      sum += (k * k - qx * qx) / (k * kz) * (1.0 + p * std::cos(kz * L));
    }
  }
  return 3.0 * pi * gamma0 / (k * a * k * a) * sum;
}

// finite-array bloch ansatz of eq-type (q, p): plane wave in the array plane,
// parity factor +-1 between the two arrays, normalised to 1.  the ansatz only
// makes sense when the two in-plane lattices match (a1 == a2).
inline Eigen::VectorXcd bloch_state(const AtomSystem& sys, const Eigen::Vector2d& q, int p) {
  if (p != 1 && p != -1) throw config_error("bloch_state: parity must be +-1");
  {
    std::vector<std::pair<double, double>> xy1, xy2;
    for (int j = 0; j < sys.n_total; ++j)
      (sys.array_index(j) == 1 ? xy1 : xy2)
          .emplace_back(sys.positions(j, 0), sys.positions(j, 1));
    std::sort(xy1.begin(), xy1.end());
    std::sort(xy2.begin(), xy2.end());
    bool match = xy1.size() == xy2.size();
    for (std::size_t i = 0; match && i < xy1.size(); ++i)
      match = std::abs(xy1[i].first - xy2[i].first) < 1e-9 &&
              std::abs(xy1[i].second - xy2[i].second) < 1e-9;
    if (!match)
      throw config_error("bloch_state: arrays have different in-plane lattices (a1 != a2)");
  }
  Eigen::VectorXcd v(sys.n_total);
  for (int j = 0; j < sys.n_total; ++j) {
    const cd phase = std::exp(iu * (q.x() * sys.positions(j, 0) + q.y() * sys.positions(j, 1)));
    v(j) = (sys.array_index(j) == 2 && p == -1) ? -phase : phase;
  }
  v /= std::sqrt(static_cast<double>(sys.n_total));
  return v;
}

struct ScalingResult {
  std::vector<int> n_perp;
  std::vector<int> n_atoms;
  std::vector<double> gamma_dark;
  double alpha = 0.0;  // gamma_dark ~ N^(-alpha), least-squares log-log slope
};

// least-squares slope alpha of gamma ~ N^(-alpha) on a log-log scale
inline double fit_power_law_exponent(const std::vector<int>& n_atoms,
                                     const std::vector<double>& gamma) {
  if (n_atoms.size() != gamma.size() || n_atoms.size() < 2)
    throw config_error("fit_power_law_exponent: need matching lists of at least two samples");
  const int m = static_cast<int>(n_atoms.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    if (!(n_atoms[i] > 0) || !(gamma[i] > 0.0))
      throw config_error("fit_power_law_exponent: samples must be positive");
    const double x = std::log(static_cast<double>(n_atoms[i]));
    const double y = std::log(gamma[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

inline ScalingResult darkstate_scaling(double a, double L, const std::vector<int>& n_perp_list) {
  if (n_perp_list.size() < 3)
    throw config_error("darkstate_scaling: need at least three sizes for a meaningful slope");
  ScalingResult r;
  for (int np : n_perp_list) {
    SystemConfig c;
    c.n_perp = np;
    c.a1 = a;
    c.delta_a = 0.0;
    c.L = L;
    c.delta_half = 0.0;
    const AtomSystem sys = build_system(c);
    const auto modes = eigenmodes(effective_hamiltonian(sys));
    r.n_perp.push_back(np);
    r.n_atoms.push_back(sys.n_total);
    r.gamma_dark.push_back(modes[classify_dark_bright(modes).dark].decay_rate);
  }
  r.alpha = fit_power_law_exponent(r.n_atoms, r.gamma_dark);
  return r;
}

}  // namespace twinlat
