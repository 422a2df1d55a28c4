#pragma once

#include <cmath>

#include "twinlat/geometry.hpp"

namespace twinlat {

// free-space dyadic Green's tensor (I + grad grad / k^2) e^{ikR}/(4 pi R),
// written in the standard closed form
//   G = e^{ikR}/(4 pi R) [ A I + B rhat rhat^T ],
//   A = 1 + i/(kR) - 1/(kR)^2,   B = -1 - 3i/(kR) + 3/(kR)^2.
inline Eigen::Matrix3cd greens_tensor(const Eigen::Vector3d& r,
                                      const Eigen::Vector3d& rp,
                                      double k = k0) {
  const Eigen::Vector3d d = r - rp;
  const double R = d.norm();
  if (!(R > 1e-12)) throw config_error("greens_tensor: evaluation point coincides with source");
  const double kr = k * R;
  const cd f = std::exp(iu * kr) / (4.0 * pi * R);
  const cd a = 1.0 + iu / kr - 1.0 / (kr * kr);
  const cd b = -1.0 - 3.0 * iu / kr + 3.0 / (kr * kr);
  const Eigen::Vector3d u = d / R;
  Eigen::Matrix3cd g = f * (a * Eigen::Matrix3d::Identity() + b * (u * u.transpose()));
  return g;
}

// coherent and dissipative dipole-dipole rates projected on the common dipole
// axis.  in natural units (lambda0 = gamma0 = 1, k = 2 pi):
//   Omega_ij = -(3/2) Re G_dd(r_i, r_j),   Gamma_ij = 3 Im G_dd(r_i, r_j),
// with the exact self-terms Omega_ii = 0, Gamma_ii = gamma0 (Im G -> k/(6 pi)).
struct CouplingMatrices {
  Eigen::MatrixXd omega;
  Eigen::MatrixXd gamma;
  Eigen::VectorXcd drive;  // filled by drive_vector when a drive is attached
};

inline CouplingMatrices coupling_matrices(const AtomSystem& sys) {
  const int n = sys.n_total;
  CouplingMatrices m;
  m.omega = Eigen::MatrixXd::Zero(n, n);
  m.gamma = Eigen::MatrixXd::Zero(n, n);
  const Eigen::Vector3cd d = sys.dipole_direction.normalized().cast<cd>();
  for (int i = 0; i < n; ++i) {
    m.gamma(i, i) = gamma0;
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Matrix3cd g = greens_tensor(sys.positions.row(i), sys.positions.row(j));
      const cd gdd = (d.adjoint() * g * d).value();
      m.omega(i, j) = m.omega(j, i) = -1.5 * gdd.real();
      m.gamma(i, j) = m.gamma(j, i) = 3.0 * gdd.imag();
    }
  }
  return m;
}

// plane-wave drive along +z (forward) or -z (backward):
// drive_k = rabi * e^{i k0 . r_k}, k0 = +-(2 pi) zhat
inline Eigen::VectorXcd drive_vector(const AtomSystem& sys, double rabi_amplitude,
                                     Direction dir) {
  if (!(rabi_amplitude >= 0.0) || !std::isfinite(rabi_amplitude))
    throw config_error("drive_vector: rabi_amplitude must be finite and >= 0");
  const double kz = (dir == Direction::forward) ? k0 : -k0;
  Eigen::VectorXcd v(sys.n_total);
  for (int j = 0; j < sys.n_total; ++j)
    v(j) = rabi_amplitude * std::exp(iu * (kz * sys.positions(j, 2)));
  return v;
}

inline CouplingMatrices coupling_matrices(const AtomSystem& sys, double rabi_amplitude,
                                          Direction dir) {
  CouplingMatrices m = coupling_matrices(sys);
  m.drive = drive_vector(sys, rabi_amplitude, dir);
  return m;
}

}  // namespace twinlat
