#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "twinlat/coupling.hpp"

namespace twinlat {

// scattered positive-frequency field at `point`, in rabi-rate units
// (d . E_sc / hbar): (3/2) gamma0 lambda0 sum_j G(point, r_j) dhat <sigma_j>
inline Eigen::Vector3cd scattered_field(const AtomSystem& sys, const Eigen::VectorXcd& sigma,
                                        const Eigen::Vector3d& point) {
  if (sigma.size() != sys.n_total)
    throw config_error("scattered_field: amplitude count does not match the system");
  const Eigen::Vector3cd d = sys.dipole_direction.normalized().cast<cd>();
  Eigen::Vector3cd e = Eigen::Vector3cd::Zero();
  for (int j = 0; j < sys.n_total; ++j)
    e += 1.5 * gamma0 * (greens_tensor(point, sys.positions.row(j)) * d) * sigma(j);
  return e;
}

// dimensionless far-field amplitude f(nhat): E_sc -> (e^{i k0 r}/r) E0 f,
//   f = (3 gamma0 lambda0 / (8 pi |Omega_R|)) sum_j (I - nhat nhat^T) dhat
//       <sigma_j> e^{-i k0 nhat . r_j}
inline Eigen::Vector3cd far_field_amplitude(const AtomSystem& sys, const Eigen::VectorXcd& sigma,
                                            const Eigen::Vector3d& nhat, double rabi_amplitude) {
  if (!(rabi_amplitude > 0.0))
    throw config_error("far_field_amplitude: needs a nonzero drive for E0 units");
  if (sigma.size() != sys.n_total)
    throw config_error("far_field_amplitude: amplitude count does not match the system");
  const Eigen::Vector3d n = nhat.normalized();
  const Eigen::Vector3cd d = sys.dipole_direction.normalized().cast<cd>();
  const Eigen::Vector3cd dperp = (d - n.cast<cd>() * (n.cast<cd>().dot(d))).eval();
  Eigen::Vector3cd f = Eigen::Vector3cd::Zero();
  for (int j = 0; j < sys.n_total; ++j) {
    const double nr = n.dot(sys.positions.row(j));
    f += dperp * sigma(j) * std::exp(-iu * (k0 * nr));
  }
  return 3.0 * gamma0 / (8.0 * pi * rabi_amplitude) * f;
}

// optical theorem: sigma_tot = (4 pi / k0) Im(e0* . f(k0 nhat_drive)),
// e0 = dhat (x), nhat along the drive.  lambda0^2 units.
inline double total_cross_section(const AtomSystem& sys, const Eigen::VectorXcd& sigma,
                                  Direction dir, double rabi_amplitude) {
  const Eigen::Vector3d n(0.0, 0.0, dir == Direction::forward ? 1.0 : -1.0);
  const Eigen::Vector3cd f = far_field_amplitude(sys, sigma, n, rabi_amplitude);
  const Eigen::Vector3cd e0 = sys.dipole_direction.normalized().cast<cd>();
  return (4.0 * pi / k0) * (e0.dot(f)).imag();
}

// equivalent extinction form of the same optical theorem, written against the
// per-atom drive phases: (3 gamma0 / (4 pi |Omega|^2)) sum_j Im[conj(drive_j) sigma_j]
inline double extinction_cross_section(const Eigen::VectorXcd& drive,
                                       const Eigen::VectorXcd& sigma) {
  const double amp2 = drive.squaredNorm() / static_cast<double>(drive.size());
  if (!(amp2 > 0.0)) throw config_error("extinction_cross_section: zero drive");
  const double s = (drive.conjugate().array() * sigma.array()).imag().sum();
  return 3.0 * gamma0 / (4.0 * pi * amp2) * s;
}

// scattered-power route: the radiated power of classical dipoles is
// sigma^dagger Gamma sigma, so the power-balance cross section reads
// (3 gamma0 / (8 pi |Omega|^2)) sigma^dagger Gamma sigma.  for the linear
// coupled-dipole steady state this equals the optical-theorem value exactly.
inline double power_balance_cross_section(const Eigen::MatrixXd& gamma,
                                          const Eigen::VectorXcd& sigma,
                                          double rabi_amplitude) {
  if (!(rabi_amplitude > 0.0)) throw config_error("power_balance_cross_section: zero drive");
  const double p = (sigma.adjoint() * gamma.cast<cd>() * sigma).value().real();
  return 3.0 * gamma0 / (8.0 * pi * rabi_amplitude * rabi_amplitude) * p;
}

// closed-form steady state of one driven atom with thermal occupation n:
// gamma' = gamma0 (2n+1), D = gamma'^2 + 4 Delta^2 + 8 |Omega|^2,
//   <sigma>  = 2 i Omega (gamma0/gamma') (gamma' - 2 i Delta) / D
//   rho_ee   = (n + 4 |Omega|^2 / D) / (2n+1)
//   sigma_tot = 3 gamma0^2 / (2 pi D)      (lambda0^2)
struct SingleAtomReference {
  cd sigma;
  double rho_ee = 0.0;
  double sigma_z = 0.0;
  double sigma_tot = 0.0;          // at the requested drive and detuning
  double sigma_weak = 3.0 / (2.0 * pi);  // resonant weak-field reference
};

inline SingleAtomReference single_atom_reference(double rabi_amplitude, double delta,
                                                 double n_thermal = 0.0) {
  if (n_thermal < 0.0) throw config_error("single_atom_reference: n_thermal must be >= 0");
  if (rabi_amplitude < 0.0) throw config_error("single_atom_reference: rabi_amplitude must be >= 0");
  const double gp = gamma0 * (2.0 * n_thermal + 1.0);
  const double d = gp * gp + 4.0 * delta * delta + 8.0 * rabi_amplitude * rabi_amplitude;
  SingleAtomReference r;
  r.sigma = 2.0 * iu * rabi_amplitude * (gamma0 / gp) * cd(gp, -2.0 * delta) / d;
  r.rho_ee = (n_thermal + 4.0 * rabi_amplitude * rabi_amplitude / d) / (2.0 * n_thermal + 1.0);
  r.sigma_z = 2.0 * r.rho_ee - 1.0;
  r.sigma_tot = 3.0 * gamma0 * gamma0 / (2.0 * pi * d);
  return r;
}

// forward/backward asymmetry figure of merit M = max(sf, sb) |sf - sb| / (sf + sb)
inline double nonreciprocal_efficiency(double sigma_f, double sigma_b) {
  if (sigma_f < 0.0 || sigma_b < 0.0)
    throw config_error("nonreciprocal_efficiency: cross sections must be >= 0");
  const double sum = sigma_f + sigma_b;
  if (sum == 0.0) throw config_error("nonreciprocal_efficiency: both cross sections are zero");
  return std::max(sigma_f, sigma_b) * std::abs(sigma_f - sigma_b) / sum;
}

// normalisation: sigma0 is the single-atom cross section at the same drive
// amplitude (the saturated reference); the resonant weak-field reference and
// the quantities rescaled by it are carried alongside.  note M is not
// scale-invariant, so the two M columns differ by more than a constant.
struct CrossSectionReport {
  double drive = 0.0;        // rabi amplitude (gamma0)
  double sigma_f = 0.0;      // forward total cross section / sigma0(drive)
  double sigma_b = 0.0;
  double m_efficiency = 0.0; // same normalised units
  double sigma_f_raw = 0.0;  // lambda0^2
  double sigma_b_raw = 0.0;
  double sigma0 = 0.0;       // single-atom reference at this drive (lambda0^2)
  double sigma0_weak = 3.0 / (2.0 * pi);
  double sigma_f_weak = 0.0; // raw / sigma0_weak
  double sigma_b_weak = 0.0;
  double m_weak = 0.0;
};

inline CrossSectionReport cross_section_report(const AtomSystem& sys, double rabi_amplitude,
                                               const Eigen::VectorXcd& sigma_fwd,
                                               const Eigen::VectorXcd& sigma_bwd) {
  CrossSectionReport r;
  r.drive = rabi_amplitude;
  r.sigma_f_raw = total_cross_section(sys, sigma_fwd, Direction::forward, rabi_amplitude);
  r.sigma_b_raw = total_cross_section(sys, sigma_bwd, Direction::backward, rabi_amplitude);
  r.sigma0 = single_atom_reference(rabi_amplitude, 0.0).sigma_tot;
  r.sigma_f = r.sigma_f_raw / r.sigma0;
  r.sigma_b = r.sigma_b_raw / r.sigma0;
  r.m_efficiency = nonreciprocal_efficiency(r.sigma_f, r.sigma_b);
  r.sigma_f_weak = r.sigma_f_raw / r.sigma0_weak;
  r.sigma_b_weak = r.sigma_b_raw / r.sigma0_weak;
  r.m_weak = nonreciprocal_efficiency(r.sigma_f_weak, r.sigma_b_weak);
  return r;
}

struct FieldSample {
  Eigen::Vector3d position;
  Eigen::Vector3cd e_in;   // E0 units
  Eigen::Vector3cd e_sc;
  Eigen::Vector3cd e_tot;
  double intensity = 0.0;  // <E- . E+> / |E0|^2; exact correlators when given
  bool skipped = false;    // point within 1e-3 lambda0 of an atom
};

// field samples over arbitrary points.  correlations = <sigma_i^+ sigma_j>
// for quantum states; pass an empty matrix to factorise (semiclassical).
// points closer than 1e-3 lambda0 to an atom are flagged, not evaluated.
inline std::vector<FieldSample> field_map(const AtomSystem& sys, const Eigen::VectorXcd& sigma,
                                          const Eigen::MatrixXcd& correlations,
                                          double rabi_amplitude, Direction dir,
                                          const std::vector<Eigen::Vector3d>& points) {
  if (!(rabi_amplitude > 0.0)) throw config_error("field_map: needs a nonzero drive for E0 units");
  if (points.empty()) throw config_error("field_map: empty grid");
  const int n = sys.n_total;
  const bool factorised = correlations.size() == 0;
  if (!factorised && (correlations.rows() != n || correlations.cols() != n))
    throw config_error("field_map: correlation matrix size mismatch");
  const double kz = dir == Direction::forward ? k0 : -k0;
  const Eigen::Vector3cd d = sys.dipole_direction.normalized().cast<cd>();

  std::vector<FieldSample> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    FieldSample s;
    s.position = p;
    s.e_in = d * std::exp(iu * (kz * p.z()));
    for (int j = 0; j < n; ++j)
      if ((p.transpose() - sys.positions.row(j)).norm() < 1e-3) s.skipped = true;
    if (s.skipped) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      s.e_sc.setConstant(cd(nan, nan));
      s.e_tot = s.e_sc;
      s.intensity = nan;
      out.push_back(s);
      continue;
    }
    Eigen::MatrixXcd g(3, n);  // per-atom propagated dipole field, E0 units
    for (int j = 0; j < n; ++j)
      g.col(j) = 1.5 * gamma0 / rabi_amplitude * (greens_tensor(p, sys.positions.row(j)) * d);
    s.e_sc = g * sigma;
    s.e_tot = s.e_in + s.e_sc;
    if (factorised) {
      s.intensity = s.e_tot.squaredNorm();
    } else {
      const cd cross = s.e_in.dot(s.e_sc);  // conj(e_in) . e_sc
      double inten = s.e_in.squaredNorm() + 2.0 * cross.real();
      inten += ((g.adjoint() * g).array() * correlations.array()).sum().real();
      s.intensity = inten;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace twinlat
