#pragma once

#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "twinlat/config.hpp"
#include "twinlat/master_equation.hpp"
#include "twinlat/mean_field.hpp"
#include "twinlat/optimize.hpp"
#include "twinlat/output.hpp"
#include "twinlat/scattering.hpp"
#include "twinlat/spectral.hpp"

namespace twinlat {
namespace cli {

// one steady-state solve with the method resolved: quantum density matrix
// up to max_quantum_atoms, factorised mean field beyond, or the linear
// (weak-drive) dipole solve on request
struct SteadySolution {
  std::string method;
  Eigen::VectorXcd sigma;
  Eigen::VectorXd sigma_z;
  bool has_rho = false;
  DensityMatrix rho;
  Eigen::MatrixXcd correlations;  // <sigma_i^+ sigma_j>, quantum only
};

inline SteadySolution solve_steady_auto(const AtomSystem& sys, double rabi, Direction dir,
                                        const SolverConfig& sc, double frequency_offset) {
  std::string method = sc.method;
  if (method == "auto")
    method = sys.n_total <= max_quantum_atoms ? "quantum" : "semiclassical";
  SteadySolution out;
  out.method = method;
  if (method == "quantum") {
    const Liouvillian l = build_liouvillian(sys, rabi, dir, frequency_offset);
    SteadyOptions opt;
    opt.tol = sc.tol > 0.0 ? sc.tol : 1e-9;
    opt.t_max = sc.t_max;
    opt.ode_tol = sc.ode_tol;
    const DensityMatrix dm = steady_state(l, opt);
    out.sigma = expectation_sigma(dm);
    out.sigma_z = expectation_sigma_z(dm);
    out.correlations = sigma_correlations(dm);
    out.rho = dm;
    out.has_rho = true;
    return out;
  }
  const AtomSystem shifted = with_frequency_offset(sys, frequency_offset);
  const Eigen::VectorXcd drv = drive_vector(shifted, rabi, dir);
  if (method == "semiclassical") {
    const CouplingMatrices cm = coupling_matrices(shifted);
    const MeanFieldResult r = integrate_to_steady(MeanFieldProblem(shifted, cm, drv),
                                                  sc.tol > 0.0 ? sc.tol : 1e-8, sc.t_max, sc.ode_tol);
    out.sigma = r.state.sigma;
    out.sigma_z = r.state.sigma_z;
  } else {  // linear
    out.sigma = linear_dipole_solve(shifted, drv);
    out.sigma_z = Eigen::VectorXd::Constant(sys.n_total, -1.0);
  }
  return out;
}

// one-line diagnostic on stderr that scripts can parse
inline std::string error_json(const std::string& kind, const std::string& message, int code) {
  return json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump();
}

inline std::vector<Direction> directions_of(const std::string& s) {
  if (s == "forward") return {Direction::forward};
  if (s == "backward") return {Direction::backward};
  if (s == "both") return {Direction::forward, Direction::backward};
  throw config_error("direction must be forward, backward or both");
}

inline json system_json(const SystemConfig& c, int n_atoms) {
  return json{{"n_perp", c.n_perp},   {"dimer_mode", c.dimer_mode}, {"a1", c.a1},
              {"delta_a", c.delta_a}, {"L", c.L},                   {"delta_half", c.delta_half},
              {"n_atoms", n_atoms}};
}

inline json drive_json(const DriveConfig& d) {
  return json{{"rabi_amplitude", d.rabi_amplitude},
              {"direction", d.direction},
              {"frequency_offset", d.frequency_offset}};
}

inline json params_json(const OptParams& p) {
  return json{{"a1", p.a1},
              {"delta_a", p.delta_a},
              {"L", p.L},
              {"delta_half", p.delta_half},
              {"rabi_amplitude", p.rabi_amplitude}};
}

inline json phase_stats_json(const Eigen::VectorXcd& sigma, const Eigen::VectorXi& array_index,
                             int which) {
  try {
    const PhaseStats st = phase_statistics(sigma, array_index, which);
    return json{{"mean_phase", st.mean_phase},
                {"variance", st.variance},
                {"circ_variance", st.circ_variance},
                {"count", st.count},
                {"excluded", st.excluded}};
  } catch (const std::exception& e) {
    return json{{"error", e.what()}};
  }
}

// full config echo for the run manifest, defaults included
inline json config_json(const RunConfig& rc) {
  json doc;
  doc["system"] = {{"n_perp", rc.system.n_perp},   {"dimer_mode", rc.system.dimer_mode},
                   {"a1", rc.system.a1},           {"delta_a", rc.system.delta_a},
                   {"L", rc.system.L},             {"delta_half", rc.system.delta_half}};
  doc["drive"] = drive_json(rc.drive);
  doc["solver"] = {{"method", rc.solver.method},
                   {"tol", rc.solver.tol},
                   {"t_max", rc.solver.t_max},
                   {"ode_tol", rc.solver.ode_tol}};
  doc["sweep"] = {{"axis", rc.sweep.axis},
                  {"from", rc.sweep.from},
                  {"to", rc.sweep.to},
                  {"points", rc.sweep.points},
                  {"log_spacing", rc.sweep.log_spacing}};
  doc["fieldmap"] = {{"plane", rc.fieldmap.plane},
                     {"extent", rc.fieldmap.extent},
                     {"offset", rc.fieldmap.offset},
                     {"resolution", rc.fieldmap.resolution}};
  doc["scaling"] = {{"a", rc.scaling.a}, {"L", rc.scaling.L}, {"n_perp", rc.scaling.n_perp_list}};
  doc["single_atom"] = {{"rabi_amplitude", rc.single_atom.rabi_amplitude},
                        {"delta", rc.single_atom.delta},
                        {"n_thermal", rc.single_atom.n_thermal}};
  doc["output"] = {{"directory", rc.output.directory}, {"write_rho", rc.output.write_rho}};
  doc["optimize"] = {{"starts", rc.optimize.starts},
                     {"max_iters", rc.optimize.max_iters},
                     {"grad_tol", rc.optimize.grad_tol},
                     {"step0", rc.optimize.step0},
                     {"fd_step", rc.optimize.fd_step},
                     {"seed", rc.optimize.seed},
                     {"dimer_mode", rc.optimize.dimer_mode},
                     {"n_perp", rc.optimize.n_perp}};
  return doc;
}

// ---- spectrum ----------------------------------------------------------

inline void run_spectrum(const RunConfig& rc, bool full_subspace) {
  const AtomSystem sys = build_system(rc.system);
  const auto modes = eigenmodes(effective_hamiltonian(sys));
  const DarkBright db = classify_dark_bright(modes);

  ensure_directory(rc.output.directory);
  Manifest man(rc.output.directory, "spectrum");
  man.set("config", config_json(rc));
  man.set("system", system_json(rc.system, sys.n_total));

  const Eigen::VectorXcd sym = bloch_state(sys, Eigen::Vector2d::Zero(), +1);
  const Eigen::VectorXcd asym = bloch_state(sys, Eigen::Vector2d::Zero(), -1);
  CsvTable tab({"index", "energy_shift", "decay_rate", "overlap_sym", "overlap_asym"});
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const auto& m = modes[i];
    tab.add_row({static_cast<double>(i), m.energy.real(), m.decay_rate,
                 std::norm(sym.dot(m.vector)), std::norm(asym.dot(m.vector))});
  }
  man.write_csv("spectrum.csv", tab);

  json doc;
  doc["system"] = system_json(rc.system, sys.n_total);
  doc["subspace"] = "single_excitation";
  doc["n_modes"] = modes.size();
  doc["dark"] = {{"index", db.dark},
                 {"energy_shift", modes[db.dark].energy.real()},
                 {"decay_rate", modes[db.dark].decay_rate},
                 {"overlap_sym", std::norm(sym.dot(modes[db.dark].vector))},
                 {"overlap_asym", std::norm(asym.dot(modes[db.dark].vector))}};
  doc["bright"] = {{"index", db.bright},
                   {"energy_shift", modes[db.bright].energy.real()},
                   {"decay_rate", modes[db.bright].decay_rate}};
  man.write_json("spectrum.json", doc);

  if (full_subspace) {
    if (sys.n_total > 10)
      throw config_error("full-subspace spectra are limited to 10 atoms");
    const auto full = eigenmodes(effective_hamiltonian(sys, Subspace::full));
    CsvTable ftab({"index", "energy_shift", "decay_rate"});
    for (std::size_t i = 0; i < full.size(); ++i)
      ftab.add_row({static_cast<double>(i), full[i].energy.real(), full[i].decay_rate});
    man.write_csv("spectrum_full.csv", ftab);
  }
  man.finalize();
}

// ---- steady ------------------------------------------------------------

inline json steady_doc(const AtomSystem& sys, const SteadySolution& s, Direction dir,
                       const std::vector<EigenMode>& modes, const DarkBright& db, double rabi,
                       double frequency_offset) {
  json doc;
  doc["direction"] = to_string(dir);
  doc["method"] = s.method;
  doc["phase_array1"] = phase_stats_json(s.sigma, sys.array_index, 1);
  doc["phase_array2"] = phase_stats_json(s.sigma, sys.array_index, 2);
  doc["total_excitation"] = 0.5 * (s.sigma_z.array() + 1.0).sum();
  doc["sigma_expectations"] = json::array();
  for (int j = 0; j < sys.n_total; ++j)
    doc["sigma_expectations"].push_back(complex_json(s.sigma(j)));
  if (s.has_rho) {
    doc["purity"] = (s.rho.rho * s.rho.rho).trace().real();
    const double svn = von_neumann_entropy(s.rho);
    doc["entropy"] = svn;
    doc["S_vN"] = svn;
    const double cd = dark_state_population(s.rho, modes[db.dark].vector);
    doc["dark_population"] = cd;
    doc["c_D"] = cd;
    doc["bright_population"] = dark_state_population(s.rho, modes[db.bright].vector);
    doc["populations_product_basis"] = json::array();
    for (Eigen::Index r = 0; r < s.rho.rho.rows(); ++r)
      doc["populations_product_basis"].push_back(s.rho.rho(r, r).real());
    // populations against the right eigenvectors of the full effective
    // hamiltonian; skipped gracefully if the basis is too ill-conditioned
    try {
      const auto full = eigenmodes(effective_hamiltonian(sys, Subspace::full));
      const DensityMatrix rt = to_eigenbasis(s.rho, full);
      doc["populations_eigen_basis"] = json::array();
      for (Eigen::Index r = 0; r < rt.rho.rows(); ++r)
        doc["populations_eigen_basis"].push_back(rt.rho(r, r).real());
    } catch (const std::exception& e) {
      doc["populations_eigen_basis"] = {{"error", e.what()}};
    }
    // alternative diagnostic: the same transform against the modes of the
    // drive-included hamiltonian the state actually evolved under, plus the
    // diagonal entry of its slowest non-ground mode
    try {
      const auto dmodes = driven_eigenmodes(sys, rabi, dir, frequency_offset);
      const int idark = driven_dark_index(dmodes);
      const DensityMatrix rt = to_eigenbasis(s.rho, dmodes);
      doc["driven_dark_decay_rate"] = dmodes[idark].decay_rate;
      doc["c_D_driven_dual"] = rt.rho(idark, idark).real();
    } catch (const std::exception& e) {
      doc["c_D_driven_dual"] = {{"error", e.what()}};
    }
  }
  return doc;
}

inline void run_steady(const RunConfig& rc) {
  const AtomSystem sys = build_system(rc.system);
  const auto modes = eigenmodes(effective_hamiltonian(sys));
  const DarkBright db = classify_dark_bright(modes);

  ensure_directory(rc.output.directory);
  Manifest man(rc.output.directory, "steady");
  man.set("config", config_json(rc));
  man.set("system", system_json(rc.system, sys.n_total));
  man.set("drive", drive_json(rc.drive));

  for (Direction dir : directions_of(rc.drive.direction)) {
    const SteadySolution s = solve_steady_auto(sys, rc.drive.rabi_amplitude, dir, rc.solver,
                                               rc.drive.frequency_offset);
    CsvTable tab({"index", "array", "x", "y", "z", "detuning", "sigma_re", "sigma_im",
                  "sigma_abs", "sigma_arg", "sigma_z"});
    for (int j = 0; j < sys.n_total; ++j)
      tab.add_row({static_cast<double>(j), static_cast<double>(sys.array_index(j)),
                   sys.positions(j, 0), sys.positions(j, 1), sys.positions(j, 2),
                   sys.detunings(j) - rc.drive.frequency_offset, s.sigma(j).real(),
                   s.sigma(j).imag(), std::abs(s.sigma(j)), std::arg(s.sigma(j)), s.sigma_z(j)});
    const std::string tag = to_string(dir);
    man.write_csv("atoms_" + tag + ".csv", tab);
    man.write_json("steady_" + tag + ".json",
                   steady_doc(sys, s, dir, modes, db, rc.drive.rabi_amplitude,
                              rc.drive.frequency_offset));
    if (rc.output.write_rho && s.has_rho) {
      CsvTable rt({"row", "col", "re", "im"});
      for (Eigen::Index r = 0; r < s.rho.rho.rows(); ++r)
        for (Eigen::Index c = 0; c < s.rho.rho.cols(); ++c)
          rt.add_row({static_cast<double>(r), static_cast<double>(c), s.rho.rho(r, c).real(),
                      s.rho.rho(r, c).imag()});
      man.write_csv("rho_" + tag + ".csv", rt);
    }
  }
  man.finalize();
}

// ---- xsection ----------------------------------------------------------

inline json xsection_doc(const AtomSystem& sys, const RunConfig& rc, const SteadySolution& sf,
                         const SteadySolution& sb) {
  const double rabi = rc.drive.rabi_amplitude;
  const CrossSectionReport r = cross_section_report(sys, rabi, sf.sigma, sb.sigma);
  // same optical theorem through the per-atom drive phases, as a cross-check
  const double ext_f =
      extinction_cross_section(drive_vector(sys, rabi, Direction::forward), sf.sigma);
  const double ext_b =
      extinction_cross_section(drive_vector(sys, rabi, Direction::backward), sb.sigma);
  json doc;
  doc["method"] = sf.method;
  doc["drive"] = drive_json(rc.drive);
  doc["sigma0"] = r.sigma0;
  doc["sigma0_weak"] = r.sigma0_weak;
  doc["sigma_forward"] = r.sigma_f;
  doc["sigma_backward"] = r.sigma_b;
  doc["sigma_forward_raw"] = r.sigma_f_raw;
  doc["sigma_backward_raw"] = r.sigma_b_raw;
  doc["sigma_forward_extinction"] = ext_f / r.sigma0;
  doc["sigma_backward_extinction"] = ext_b / r.sigma0;
  doc["m_efficiency"] = r.m_efficiency;
  doc["sigma_forward_weak"] = r.sigma_f_weak;
  doc["sigma_backward_weak"] = r.sigma_b_weak;
  doc["m_weak"] = r.m_weak;
  return doc;
}

inline void run_xsection(const RunConfig& rc) {
  const AtomSystem sys = build_system(rc.system);
  const SteadySolution sf = solve_steady_auto(sys, rc.drive.rabi_amplitude, Direction::forward,
                                              rc.solver, rc.drive.frequency_offset);
  const SteadySolution sb = solve_steady_auto(sys, rc.drive.rabi_amplitude, Direction::backward,
                                              rc.solver, rc.drive.frequency_offset);
  ensure_directory(rc.output.directory);
  Manifest man(rc.output.directory, "xsection");
  man.set("config", config_json(rc));
  man.set("system", system_json(rc.system, sys.n_total));
  man.write_json("xsection.json", xsection_doc(sys, rc, sf, sb));
  man.finalize();
}

// ---- sweep -------------------------------------------------------------

inline void run_sweep(const RunConfig& rc) {
  const AtomSystem sys = build_system(rc.system);
  const SweepConfig& sw = rc.sweep;
  std::vector<double> values(sw.points);
  for (int i = 0; i < sw.points; ++i) {
    const double t = static_cast<double>(i) / (sw.points - 1);
    values[i] = sw.log_spacing ? sw.from * std::pow(sw.to / sw.from, t)
                               : sw.from + t * (sw.to - sw.from);
  }

  // modes are drive-independent, and a frequency offset only shifts the
  // eigenvalues, so one diagonalisation serves the whole sweep
  const auto modes = eigenmodes(effective_hamiltonian(sys));
  const DarkBright db = classify_dark_bright(modes);

  struct Point {
    CrossSectionReport rep;
    double cd_f = std::nan(""), cd_b = std::nan("");
    double cdd_f = std::nan(""), cdd_b = std::nan("");
    double svn_f = std::nan(""), svn_b = std::nan("");
    std::string method;
  };
  std::vector<Point> pts(sw.points);
  parallel_for(
      sw.points,
      [&](int i) {
        const double rabi = sw.axis == "power" ? values[i] : rc.drive.rabi_amplitude;
        const double off = sw.axis == "power" ? rc.drive.frequency_offset : values[i];
        const SteadySolution sf = solve_steady_auto(sys, rabi, Direction::forward, rc.solver, off);
        const SteadySolution sb = solve_steady_auto(sys, rabi, Direction::backward, rc.solver, off);
        Point p;
        p.rep = cross_section_report(sys, rabi, sf.sigma, sb.sigma);
        p.method = sf.method;
        if (sf.has_rho) {
          p.cd_f = dark_state_population(sf.rho, modes[db.dark].vector);
          p.cd_b = dark_state_population(sb.rho, modes[db.dark].vector);
          p.svn_f = von_neumann_entropy(sf.rho);
          p.svn_b = von_neumann_entropy(sb.rho);
          // drive-included eigenbasis diagnostic, per direction
          try {
            const auto mf = driven_eigenmodes(sys, rabi, Direction::forward, off);
            p.cdd_f = to_eigenbasis(sf.rho, mf).rho.diagonal()(driven_dark_index(mf)).real();
            const auto mb = driven_eigenmodes(sys, rabi, Direction::backward, off);
            p.cdd_b = to_eigenbasis(sb.rho, mb).rho.diagonal()(driven_dark_index(mb)).real();
          } catch (const std::exception&) {
            // leave as nan when the dressed basis is ill-conditioned
          }
        }
        pts[i] = p;
      },
      worker_count());

  ensure_directory(rc.output.directory);
  Manifest man(rc.output.directory, "sweep");
  man.set("config", config_json(rc));
  man.set("system", system_json(rc.system, sys.n_total));
  man.set("axis", sw.axis);

  CsvTable tab({sw.axis == "power" ? "rabi_amplitude" : "frequency_offset", "sigma_f", "sigma_b",
                "m_efficiency", "sigma_f_weak", "sigma_b_weak", "m_weak", "sigma_f_raw",
                "sigma_b_raw", "sigma0", "dark_pop_f", "dark_pop_b", "dark_dual_f", "dark_dual_b",
                "entropy_f", "entropy_b"});
  int peak = 0;
  for (int i = 0; i < sw.points; ++i) {
    const auto& p = pts[i];
    tab.add_row({values[i], p.rep.sigma_f, p.rep.sigma_b, p.rep.m_efficiency, p.rep.sigma_f_weak,
                 p.rep.sigma_b_weak, p.rep.m_weak, p.rep.sigma_f_raw, p.rep.sigma_b_raw,
                 p.rep.sigma0, p.cd_f, p.cd_b, p.cdd_f, p.cdd_b, p.svn_f, p.svn_b});
    if (p.rep.m_efficiency > pts[peak].rep.m_efficiency) peak = i;
  }
  man.write_csv("sweep.csv", tab);

  json doc;
  doc["axis"] = sw.axis;
  doc["points"] = sw.points;
  doc["method"] = pts.empty() ? "" : pts[0].method;
  doc["peak"] = {{"value", values[peak]},
                 {"m_efficiency", pts[peak].rep.m_efficiency},
                 {"m_weak", pts[peak].rep.m_weak},
                 {"sigma_f", pts[peak].rep.sigma_f},
                 {"sigma_b", pts[peak].rep.sigma_b}};
  man.write_json("sweep.json", doc);
  man.finalize();
}

// ---- fieldmap ----------------------------------------------------------

inline std::vector<Eigen::Vector3d> fieldmap_grid(const FieldmapConfig& fm, double L) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<std::size_t>(fm.resolution) * fm.resolution);
  const int n = fm.resolution;
  const auto lin = [&](double lo, double hi, int i) {
    return lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  };
  if (fm.plane == "xz") {
    const double zmid = 0.5 * L;
    for (int iz = 0; iz < n; ++iz)
      for (int ix = 0; ix < n; ++ix)
        pts.emplace_back(lin(-fm.extent, fm.extent, ix), fm.offset,
                         lin(zmid - fm.extent, zmid + fm.extent, iz));
  } else {  // xy
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        pts.emplace_back(lin(-fm.extent, fm.extent, ix), lin(-fm.extent, fm.extent, iy),
                         fm.offset);
  }
  return pts;
}

inline void run_fieldmap(const RunConfig& rc) {
  const AtomSystem sys = build_system(rc.system);
  ensure_directory(rc.output.directory);
  Manifest man(rc.output.directory, "fieldmap");
  man.set("config", config_json(rc));
  man.set("system", system_json(rc.system, sys.n_total));

  const auto dirs = directions_of(rc.drive.direction);
  const auto pts = fieldmap_grid(rc.fieldmap, rc.system.L);

  json header;
  header["plane"] = rc.fieldmap.plane;
  header["extent"] = rc.fieldmap.extent;
  header["offset"] = rc.fieldmap.offset;
  header["resolution"] = rc.fieldmap.resolution;
  header["n_points"] = pts.size();
  header["drive"] = drive_json(rc.drive);
  header["system"] = system_json(rc.system, sys.n_total);
  header["units"] = {{"length", "lambda0"}, {"intensity", "|e_in|^2 of the unit plane wave"}};
  header["columns"] = {"kz_sign", "x",        "y",        "z",        "ein_x_re", "ein_x_im",
                       "esc_x_re", "esc_x_im", "esc_y_re", "esc_y_im", "esc_z_re", "esc_z_im",
                       "etot_x_re", "etot_x_im", "intensity", "skipped"};

  CsvTable tab({"kz_sign", "x", "y", "z", "ein_x_re", "ein_x_im", "esc_x_re", "esc_x_im",
                "esc_y_re", "esc_y_im", "esc_z_re", "esc_z_im", "etot_x_re", "etot_x_im",
                "intensity", "skipped"});
  json methods = json::array();
  for (Direction dir : dirs) {
    const SteadySolution s = solve_steady_auto(sys, rc.drive.rabi_amplitude, dir, rc.solver,
                                               rc.drive.frequency_offset);
    methods.push_back({{"direction", to_string(dir)}, {"method", s.method}});
    const auto samples = field_map(sys, s.sigma, s.correlations, rc.drive.rabi_amplitude, dir,
                                   pts);
    const double kz = dir == Direction::forward ? 1.0 : -1.0;
    for (const auto& fs : samples)
      tab.add_row({kz, fs.position.x(), fs.position.y(), fs.position.z(), fs.e_in.x().real(),
                   fs.e_in.x().imag(), fs.e_sc.x().real(), fs.e_sc.x().imag(), fs.e_sc.y().real(),
                   fs.e_sc.y().imag(), fs.e_sc.z().real(), fs.e_sc.z().imag(), fs.e_tot.x().real(),
                   fs.e_tot.x().imag(), fs.intensity, fs.skipped ? 1.0 : 0.0});
  }
  header["runs"] = methods;
  man.write_json("header.json", header);
  man.write_csv("grid.csv", tab);
  man.finalize();
}

// ---- optimize ----------------------------------------------------------

inline void run_optimize(const RunConfig& rc) {
  OptSettings s = rc.optimize;
  s.workers = worker_count();
  const OptResult res = optimize(s);

  ensure_directory(rc.output.directory);
  Manifest man(rc.output.directory, "optimize");
  man.set("config", config_json(rc));
  man.set("seed", s.seed);
  man.set("starts", s.starts);

  CsvTable tab({"start", "iter", "a1", "delta_a", "L", "delta_half", "rabi_amplitude",
                "m_squared", "grad_norm"});
  for (const auto& it : res.trace)
    tab.add_row({static_cast<double>(it.start), static_cast<double>(it.iter), it.params.a1,
                 it.params.delta_a, it.params.L, it.params.delta_half, it.params.rabi_amplitude,
                 it.value, it.grad_norm});
  man.write_csv("trace.csv", tab);

  json doc;
  doc["best"] = params_json(res.best);
  doc["best_m_squared"] = res.best_value;
  doc["best_m"] = std::sqrt(std::max(0.0, res.best_value));
  doc["best_start"] = res.best_start;
  doc["settings"] = {{"starts", s.starts},     {"max_iters", s.max_iters},
                     {"grad_tol", s.grad_tol}, {"fd_step", s.fd_step},
                     {"seed", s.seed},         {"dimer_mode", s.dimer_mode},
                     {"n_perp", s.n_perp}};
  doc["starts"] = json::array();
  for (const auto& st : res.starts)
    doc["starts"].push_back({{"initial", params_json(st.initial)},
                             {"final", params_json(st.final)},
                             {"m_squared", st.value},
                             {"iters", st.iters}});
  doc["trace"] = json::array();
  for (const auto& it : res.trace)
    doc["trace"].push_back({{"start", it.start},
                            {"iter", it.iter},
                            {"params", params_json(it.params)},
                            {"m_squared", it.value},
                            {"grad_norm", it.grad_norm}});
  man.write_json("trace.json", doc);

  SystemConfig best;
  best.n_perp = s.n_perp;
  best.dimer_mode = s.dimer_mode;
  best.a1 = res.best.a1;
  best.delta_a = res.best.delta_a;
  best.L = res.best.L;
  best.delta_half = res.best.delta_half;
  man.write_raw("best.cfg", config_to_text(best, res.best.rabi_amplitude), "config");
  man.finalize();
}

// ---- single-atom -------------------------------------------------------

inline void run_single_atom(const RunConfig& rc) {
  const SingleAtomConfig& sa = rc.single_atom;
  const SingleAtomReference ref = single_atom_reference(sa.rabi_amplitude, sa.delta,
                                                        sa.n_thermal);
  json doc;
  doc["input"] = {{"rabi_amplitude", sa.rabi_amplitude},
                  {"delta", sa.delta},
                  {"n_thermal", sa.n_thermal}};
  doc["closed_form"] = {{"sigma", complex_json(ref.sigma)},
                        {"rho_ee", ref.rho_ee},
                        {"sigma_z", ref.sigma_z},
                        {"sigma_tot", ref.sigma_tot},
                        {"sigma_weak", ref.sigma_weak},
                        {"saturation_ratio", ref.sigma_tot / ref.sigma_weak}};
  // the master equation here has no thermal bath, so the numeric
  // cross-check applies at n_thermal = 0 only
  if (sa.n_thermal == 0.0 && sa.rabi_amplitude > 0.0) {
    const AtomSystem sys = single_atom_system(sa.delta);
    const Liouvillian l = build_liouvillian(sys, sa.rabi_amplitude, Direction::forward);
    const DensityMatrix dm = steady_state(l);
    const Eigen::VectorXcd sg = expectation_sigma(dm);
    const double stot = total_cross_section(sys, sg, Direction::forward, sa.rabi_amplitude);
    doc["numeric"] = {{"sigma", complex_json(sg(0))},
                      {"sigma_z", expectation_sigma_z(dm)(0)},
                      {"sigma_tot", stot},
                      {"sigma_deviation", std::abs(sg(0) - ref.sigma)},
                      {"sigma_tot_deviation", std::abs(stot - ref.sigma_tot)}};
  }
  ensure_directory(rc.output.directory);
  Manifest man(rc.output.directory, "single-atom");
  man.set("config", config_json(rc));
  man.write_json("single_atom.json", doc);
  man.finalize();
}

// ---- scaling -----------------------------------------------------------

inline void run_scaling(const RunConfig& rc) {
  const ScalingConfig& sc = rc.scaling;
  const ScalingResult r = darkstate_scaling(sc.a, sc.L, sc.n_perp_list);

  ensure_directory(rc.output.directory);
  Manifest man(rc.output.directory, "scaling");
  man.set("config", config_json(rc));
  CsvTable tab({"n_perp", "n_atoms", "gamma_dark"});
  for (std::size_t i = 0; i < r.n_perp.size(); ++i)
    tab.add_row({static_cast<double>(r.n_perp[i]), static_cast<double>(r.n_atoms[i]),
                 r.gamma_dark[i]});
  man.write_csv("scaling.csv", tab);

  json doc;
  doc["a"] = sc.a;
  doc["L"] = sc.L;
  doc["alpha"] = r.alpha;
  doc["n_atoms"] = r.n_atoms;
  doc["gamma_dark"] = r.gamma_dark;
  // q = 0 limits of the two parity branches for an unbounded array pair
  // with the same pitch and spacing, where the light cone allows them
  for (int p : {+1, -1}) {
    const std::string key = p > 0 ? "lattice_gamma_sym" : "lattice_gamma_asym";
    try {
      doc[key] = infinite_lattice_decay(sc.a, sc.L, Eigen::Vector2d::Zero(), p);
    } catch (const std::exception&) {
      doc[key] = nullptr;
    }
  }
  man.write_json("scaling.json", doc);
  man.finalize();
}

// ---- argument parsing ----------------------------------------------------

inline int run_command(const std::vector<std::string>& args) {
  CLI::App app{"coupled pairs of two-level-atom arrays: spectra, steady states,"
               " directional cross sections"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("twinlat ") + version_string);

  std::string config_path, outdir, direction, method;
  const double unset = std::nan("");
  double rabi = unset, offset = unset;
  double a1 = unset, delta_a = unset, lsep = unset, delta_half = unset;
  int n_perp = -1;
  bool dimer_on = false, dimer_off = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run file (documented in the readme)")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--output", outdir, "output directory");
    sub->add_option("--rabi,--power", rabi, "drive rabi amplitude (gamma0)");
    sub->add_option("--direction", direction, "forward | backward | both");
    sub->add_option("--frequency-offset", offset, "drive frequency offset (gamma0)");
    sub->add_option("--method", method, "auto | quantum | semiclassical | linear");
    sub->add_option("--n-perp", n_perp, "atoms per side of each square array");
    sub->add_option("--a1", a1, "pitch of array 1 (lambda0)");
    sub->add_option("--delta-a", delta_a, "pitch increment of array 2 (lambda0)");
    sub->add_option("--separation", lsep, "array separation L (lambda0)");
    sub->add_option("--delta-half", delta_half, "detuning split Delta (gamma0)");
    sub->add_flag("--dimer", dimer_on, "two atoms per array on the x axis");
    sub->add_flag("--no-dimer", dimer_off, "full square arrays");
  };

  CLI::App* c_spectrum = app.add_subcommand("spectrum", "collective eigenmodes");
  bool full_subspace = false;
  c_spectrum->add_flag("--full", full_subspace, "also diagonalise the full product space");
  CLI::App* c_steady = app.add_subcommand("steady", "driven steady states");
  bool write_rho = false;
  c_steady->add_flag("--write-rho", write_rho, "dump density matrices (quantum method)");
  CLI::App* c_xsection = app.add_subcommand("xsection", "forward/backward total cross sections");
  CLI::App* c_sweep = app.add_subcommand("sweep", "cross sections vs power or frequency");
  std::string axis;
  double from = unset, to = unset;
  int points = -1;
  bool log_flag = false, linear_flag = false;
  c_sweep->add_option("--axis", axis, "power | frequency");
  c_sweep->add_option("--from", from, "sweep start");
  c_sweep->add_option("--to", to, "sweep end");
  c_sweep->add_option("--points", points, "sample count");
  c_sweep->add_flag("--log", log_flag, "logarithmic spacing");
  c_sweep->add_flag("--linear", linear_flag, "linear spacing");
  CLI::App* c_fieldmap = app.add_subcommand("fieldmap", "intensity maps around the arrays");
  std::string plane;
  double extent = unset, plane_offset = unset;
  int resolution = -1;
  c_fieldmap->add_option("--plane", plane, "xz | xy");
  c_fieldmap->add_option("--extent", extent, "half-width of the map (lambda0)");
  c_fieldmap->add_option("--plane-offset", plane_offset, "offset along the plane normal");
  c_fieldmap->add_option("--resolution", resolution, "samples per axis");
  CLI::App* c_optimize = app.add_subcommand("optimize", "search for strong asymmetry");
  int starts = -1, iters = -1;
  double seed = unset;
  c_optimize->add_option("--starts", starts, "number of random starts");
  c_optimize->add_option("--iters", iters, "iteration cap per start");
  c_optimize->add_option("--seed", seed, "random seed");
  CLI::App* c_single = app.add_subcommand("single-atom", "closed-form reference values");
  double sa_delta = unset, sa_nth = unset;
  c_single->add_option("--delta", sa_delta, "detuning (gamma0)");
  c_single->add_option("--n-thermal", sa_nth, "thermal occupation of the bath");
  CLI::App* c_scaling = app.add_subcommand("scaling", "dark-mode decay vs array size");
  double sc_a = unset, sc_l = unset;
  std::vector<int> sc_sizes;
  c_scaling->add_option("--pitch", sc_a, "common pitch (lambda0)");
  c_scaling->add_option("--sep", sc_l, "array separation (lambda0)");
  c_scaling->add_option("--sizes", sc_sizes, "n_perp values to compare");

  for (CLI::App* sub :
       {c_spectrum, c_steady, c_xsection, c_sweep, c_fieldmap, c_optimize, c_single, c_scaling})
    add_common(sub);

  std::vector<const char*> argv;
  argv.push_back("twinlat");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      if (code == 0) return 0;  // --help / --version
      std::cerr << error_json("config", e.what(), 2) << "\n";
      return 2;
    }

    RunConfig rc = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!outdir.empty()) rc.output.directory = outdir;
    if (!std::isnan(rabi)) rc.drive.rabi_amplitude = rabi;
    if (!direction.empty()) rc.drive.direction = direction;
    if (!std::isnan(offset)) rc.drive.frequency_offset = offset;
    if (!method.empty()) rc.solver.method = method;
    if (n_perp >= 0) rc.system.n_perp = n_perp;
    if (!std::isnan(a1)) rc.system.a1 = a1;
    if (!std::isnan(delta_a)) rc.system.delta_a = delta_a;
    if (!std::isnan(lsep)) rc.system.L = lsep;
    if (!std::isnan(delta_half)) rc.system.delta_half = delta_half;
    if (dimer_on && dimer_off) throw config_error("--dimer and --no-dimer conflict");
    if (dimer_on) rc.system.dimer_mode = true;
    if (dimer_off) rc.system.dimer_mode = false;
    if (rc.solver.method != "auto" && rc.solver.method != "quantum" &&
        rc.solver.method != "semiclassical" && rc.solver.method != "linear")
      throw config_error("method must be auto, quantum, semiclassical or linear");
    directions_of(rc.drive.direction);  // validate early
    rc.output.write_rho = rc.output.write_rho || write_rho;

    if (app.got_subcommand(c_sweep)) {
      if (!axis.empty()) rc.sweep.axis = axis;
      if (!std::isnan(from)) rc.sweep.from = from;
      if (!std::isnan(to)) rc.sweep.to = to;
      if (points >= 0) rc.sweep.points = points;
      if (log_flag && linear_flag) throw config_error("--log and --linear conflict");
      if (log_flag) rc.sweep.log_spacing = true;
      if (linear_flag) rc.sweep.log_spacing = false;
      if (rc.sweep.axis != "power" && rc.sweep.axis != "frequency")
        throw config_error("sweep axis must be power or frequency");
      if (rc.sweep.points < 2) throw config_error("sweep needs at least 2 points");
      if (rc.sweep.log_spacing && (rc.sweep.from <= 0.0 || rc.sweep.to <= 0.0))
        throw config_error("log-spaced sweeps need positive endpoints");
    }
    if (app.got_subcommand(c_fieldmap)) {
      if (!plane.empty()) rc.fieldmap.plane = plane;
      if (!std::isnan(extent)) rc.fieldmap.extent = extent;
      if (!std::isnan(plane_offset)) rc.fieldmap.offset = plane_offset;
      if (resolution >= 0) rc.fieldmap.resolution = resolution;
      if (rc.fieldmap.plane != "xz" && rc.fieldmap.plane != "xy")
        throw config_error("fieldmap plane must be xz or xy");
      if (rc.fieldmap.resolution < 2) throw config_error("fieldmap resolution must be >= 2");
    }
    if (app.got_subcommand(c_optimize)) {
      if (starts >= 0) rc.optimize.starts = starts;
      if (iters >= 0) rc.optimize.max_iters = iters;
      if (!std::isnan(seed)) rc.optimize.seed = static_cast<std::uint64_t>(seed);
    }
    if (app.got_subcommand(c_single)) {
      if (!std::isnan(rabi)) rc.single_atom.rabi_amplitude = rabi;
      if (!std::isnan(sa_delta)) rc.single_atom.delta = sa_delta;
      if (!std::isnan(sa_nth)) rc.single_atom.n_thermal = sa_nth;
    }
    if (app.got_subcommand(c_scaling)) {
      if (!std::isnan(sc_a)) rc.scaling.a = sc_a;
      if (!std::isnan(sc_l)) rc.scaling.L = sc_l;
      if (!sc_sizes.empty()) rc.scaling.n_perp_list = sc_sizes;
    }

    if (app.got_subcommand(c_spectrum)) run_spectrum(rc, full_subspace);
    else if (app.got_subcommand(c_steady)) run_steady(rc);
    else if (app.got_subcommand(c_xsection)) run_xsection(rc);
    else if (app.got_subcommand(c_sweep)) run_sweep(rc);
    else if (app.got_subcommand(c_fieldmap)) run_fieldmap(rc);
    else if (app.got_subcommand(c_optimize)) run_optimize(rc);
    else if (app.got_subcommand(c_single)) run_single_atom(rc);
    else if (app.got_subcommand(c_scaling)) run_scaling(rc);
    return 0;
  } catch (const config_error& e) {
    std::cerr << error_json("config", e.what(), 2) << "\n";
    return 2;
  } catch (const solver_error& e) {
    std::cerr << error_json("solver", e.what(), 3) << "\n";
    return 3;
  } catch (const io_error& e) {
    std::cerr << error_json("io", e.what(), 4) << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", e.what(), 3) << "\n";
    return 3;
  }
}

}  // namespace cli
}  // namespace twinlat
