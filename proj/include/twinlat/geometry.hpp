#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "twinlat/common.hpp"

namespace twinlat {

// a pair of square n_perp x n_perp arrays normal to z, array 1 at z = 0 with
// pitch a1, array 2 at z = L with pitch a2 = a1 + delta_a.  dimer_mode swaps
// each array for a 2-atom pair along x with the same pitch parameters.
struct SystemConfig {
  int n_perp = 1;
  double a1 = 0.25;          // pitch of array 1 (lambda0)
  double delta_a = 0.0;      // pitch increment of array 2 (lambda0)
  double L = 0.5;            // array separation (lambda0)
  double delta_half = 0.0;   // detuning split Delta (gamma0): omega_1 = omega0 - Delta/2, omega_2 = omega0 + Delta/2
  bool dimer_mode = false;
};

struct AtomSystem {
  Eigen::Matrix<double, Eigen::Dynamic, 3> positions;  // row per atom
  Eigen::VectorXd detunings;                           // Delta_k = omega_k - omega0 (gamma0)
  Eigen::VectorXi array_index;                         // 1 or 2
  Eigen::Vector3d dipole_direction{1.0, 0.0, 0.0};     // all dipoles along x
  int n_total = 0;
};

inline std::vector<std::string> validate_config(const SystemConfig& c) {
  std::vector<std::string> v;
  if (c.n_perp < 1) v.push_back("n_perp must be >= 1");
  if (!(c.a1 > 0.0) || !std::isfinite(c.a1)) v.push_back("a1 must be positive and finite");
  if (!std::isfinite(c.delta_a)) v.push_back("delta_a must be finite");
  if (!(c.a1 + c.delta_a > 0.0)) v.push_back("a1 + delta_a (pitch of array 2) must be positive");
  if (!(c.L > 0.0) || !std::isfinite(c.L)) v.push_back("L must be positive and finite (coincident arrays are singular)");
  if (!std::isfinite(c.delta_half)) v.push_back("delta_half must be finite");
  return v;
}

inline AtomSystem build_system(const SystemConfig& c) {
  auto violations = validate_config(c);
  if (!violations.empty()) {
    std::string msg = "invalid system config:";
    for (const auto& s : violations) msg += " " + s + ";";
    throw config_error(msg);
  }

  const int per_array = c.dimer_mode ? 2 : c.n_perp * c.n_perp;
  const int n = 2 * per_array;

  AtomSystem sys;
  sys.positions.resize(n, 3);
  sys.detunings.resize(n);
  sys.array_index.resize(n);
  sys.n_total = n;

  int row = 0;
  for (int arr = 1; arr <= 2; ++arr) {
    const double pitch = (arr == 1) ? c.a1 : c.a1 + c.delta_a;
    const double z = (arr == 1) ? 0.0 : c.L;
    const double det = (arr == 1) ? -0.5 * c.delta_half : 0.5 * c.delta_half;
    if (c.dimer_mode) {
      // 2-atom pair along x, centred on the z axis
      for (double sx : {-0.5, 0.5}) {
        sys.positions.row(row) << sx * pitch, 0.0, z;
        sys.detunings(row) = det;
        sys.array_index(row) = arr;
        ++row;
      }
    } else {
      // square grid centred on the z axis, row-major
      const double off = 0.5 * (c.n_perp - 1);
      for (int iy = 0; iy < c.n_perp; ++iy)
        for (int ix = 0; ix < c.n_perp; ++ix) {
          sys.positions.row(row) << (ix - off) * pitch, (iy - off) * pitch, z;
          sys.detunings(row) = det;
          sys.array_index(row) = arr;
          ++row;
        }
    }
  }
  return sys;
}

// shift of the drive frequency omega0 by x (gamma0) moves every detuning by -x
inline AtomSystem with_frequency_offset(AtomSystem sys, double offset) {
  sys.detunings.array() -= offset;
  return sys;
}

// one atom at the origin, for reference calculations and cross-checks
inline AtomSystem single_atom_system(double delta = 0.0) {
  AtomSystem sys;
  sys.n_total = 1;
  sys.positions.setZero(1, 3);
  sys.detunings.resize(1);
  sys.detunings << delta;
  sys.array_index.resize(1);
  sys.array_index << 1;
  return sys;
}

}  // namespace twinlat
