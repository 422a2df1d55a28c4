#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "twinlat/geometry.hpp"
#include "twinlat/optimize.hpp"

namespace twinlat {

// run-file format: `key value...` lines and `name { ... }` blocks, comments
// start with '#'.  unknown keys are rejected with their line number.
namespace cfg {

struct Entry {
  std::string value;
  int line = 0;
  mutable bool used = false;
};

struct Node {
  std::map<std::string, Entry> kv;
  std::map<std::string, Node> children;
  int line = 0;
  mutable bool used = false;
};

namespace detail {

inline std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline Node parse_text(const std::string& text) {
  Node root;
  std::vector<Node*> stack{&root};
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string line = detail::strip(raw);
    if (line.empty()) continue;
    if (line == "}") {
      if (stack.size() == 1)
        throw config_error("config line " + std::to_string(lineno) + ": unmatched '}'");
      stack.pop_back();
      continue;
    }
    if (line.back() == '{') {
      const std::string name = detail::strip(line.substr(0, line.size() - 1));
      if (name.empty() || name.find_first_of(" \t") != std::string::npos)
        throw config_error("config line " + std::to_string(lineno) + ": bad block header");
      Node& cur = *stack.back();
      if (cur.children.count(name) || cur.kv.count(name))
        throw config_error("config line " + std::to_string(lineno) + ": duplicate '" + name + "'");
      Node& child = cur.children[name];
      child.line = lineno;
      stack.push_back(&child);
      continue;
    }
    const auto sp = line.find_first_of(" \t");
    if (sp == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) + ": key '" + line +
                         "' has no value");
    const std::string key = line.substr(0, sp);
    const std::string value = detail::strip(line.substr(sp + 1));
    Node& cur = *stack.back();
    if (cur.children.count(key) || cur.kv.count(key))
      throw config_error("config line " + std::to_string(lineno) + ": duplicate '" + key + "'");
    cur.kv[key] = Entry{value, lineno, false};
  }
  if (stack.size() != 1) throw config_error("config: unclosed block at end of file");
  return root;
}

// typed readers; every access marks the entry used so leftovers can be
// reported as unknown keys afterwards
class Reader {
 public:
  explicit Reader(const Node& node) : node_(node) { node_.used = true; }

  bool has(const std::string& key) const { return node_.kv.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = node_.kv.find(key);
    if (it == node_.kv.end()) return fallback;
    it->second.used = true;
    return it->second.value;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = node_.kv.find(key);
    if (it == node_.kv.end()) return fallback;
    it->second.used = true;
    return parse_double(it->second.value, it->second.line, key);
  }

  int get_int(const std::string& key, int fallback) const {
    const auto it = node_.kv.find(key);
    if (it == node_.kv.end()) return fallback;
    it->second.used = true;
    try {
      std::size_t pos = 0;
      const int v = std::stoi(it->second.value, &pos);
      if (pos != it->second.value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw config_error("config line " + std::to_string(it->second.line) + ": '" + key +
                         "' wants an integer, got '" + it->second.value + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = node_.kv.find(key);
    if (it == node_.kv.end()) return fallback;
    it->second.used = true;
    const std::string& v = it->second.value;
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw config_error("config line " + std::to_string(it->second.line) + ": '" + key +
                       "' wants true/false, got '" + v + "'");
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    const auto it = node_.kv.find(key);
    if (it == node_.kv.end()) return fallback;
    it->second.used = true;
    std::vector<double> out;
    std::istringstream ss(it->second.value);
    std::string tok;
    while (ss >> tok) out.push_back(parse_double(tok, it->second.line, key));
    if (out.empty())
      throw config_error("config line " + std::to_string(it->second.line) + ": '" + key +
                         "' wants a list of numbers");
    return out;
  }

  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const {
    std::vector<double> d = get_double_list(key, {});
    if (d.empty()) return fallback;
    std::vector<int> out;
    for (double x : d) {
      const int v = static_cast<int>(std::lround(x));
      if (std::abs(x - v) > 1e-12)
        throw config_error("config: '" + key + "' wants integers");
      out.push_back(v);
    }
    return out;
  }

  Reader child(const std::string& name) const {
    const auto it = node_.children.find(name);
    if (it == node_.children.end()) {
      static const Node empty;
      return Reader(empty);
    }
    return Reader(it->second);
  }

  bool has_child(const std::string& name) const { return node_.children.count(name) > 0; }

 private:
  static double parse_double(const std::string& v, int line, const std::string& key) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return x;
    } catch (const std::exception&) {
      throw config_error("config line " + std::to_string(line) + ": '" + key +
                         "' wants a number, got '" + v + "'");
    }
  }

  const Node& node_;
};

inline void collect_unused(const Node& node, const std::string& path,
                           std::vector<std::string>& out) {
  for (const auto& [key, entry] : node.kv)
    if (!entry.used)
      out.push_back("line " + std::to_string(entry.line) + ": unknown key '" + path + key + "'");
  for (const auto& [name, child] : node.children) {
    if (!child.used)
      out.push_back("line " + std::to_string(child.line) + ": unknown block '" + path + name +
                    "'");
    else
      collect_unused(child, path + name + ".", out);
  }
}

}  // namespace cfg

struct DriveConfig {
  double rabi_amplitude = 0.01;
  std::string direction = "both";  // forward | backward | both
  double frequency_offset = 0.0;   // global detuning shift of the drive
};

struct SolverConfig {
  std::string method = "auto";  // auto | quantum | semiclassical | linear
  double tol = 0.0;             // 0 = per-method default: 1e-9 quantum, 1e-8 semiclassical
  double t_max = 5000.0;
  double ode_tol = 1e-10;
};

struct SweepConfig {
  std::string axis = "power";  // power | frequency
  double from = 1e-2;
  double to = 10.0;
  int points = 40;
  bool log_spacing = true;
};

struct FieldmapConfig {
  std::string plane = "xz";  // xz | xy
  double offset = 0.0;       // plane offset along its normal
  double extent = 2.0;       // half-width, lambda0
  int resolution = 41;       // samples per axis
};

struct ScalingConfig {
  double a = 0.2;
  double L = 1.0;
  std::vector<int> n_perp_list{2, 3, 4, 5, 6};
};

struct SingleAtomConfig {
  double rabi_amplitude = 0.5;
  double delta = 0.0;
  double n_thermal = 0.0;
};

struct OutputConfig {
  std::string directory = "out";
  bool write_rho = false;
};

struct RunConfig {
  SystemConfig system;
  DriveConfig drive;
  SolverConfig solver;
  SweepConfig sweep;
  FieldmapConfig fieldmap;
  OptSettings optimize;
  ScalingConfig scaling;
  SingleAtomConfig single_atom;
  OutputConfig output;
};

inline RunConfig bind_config(const cfg::Node& root) {
  RunConfig rc;
  cfg::Reader top(root);
  const int version = top.get_int("version", 1);
  if (version != 1) throw config_error("config: unsupported version " + std::to_string(version));

  {
    cfg::Reader r = top.child("system");
    rc.system.n_perp = r.get_int("n_perp", rc.system.n_perp);
    rc.system.dimer_mode = r.get_bool("dimer_mode", rc.system.dimer_mode);
    rc.system.a1 = r.get_double("a1", rc.system.a1);
    rc.system.delta_a = r.get_double("delta_a", rc.system.delta_a);
    rc.system.L = r.get_double("L", rc.system.L);
    rc.system.delta_half = r.get_double("delta_half", rc.system.delta_half);
  }
  {
    cfg::Reader r = top.child("drive");
    rc.drive.rabi_amplitude = r.get_double("rabi_amplitude", rc.drive.rabi_amplitude);
    rc.drive.direction = r.get_string("direction", rc.drive.direction);
    rc.drive.frequency_offset = r.get_double("frequency_offset", rc.drive.frequency_offset);
    if (rc.drive.direction != "forward" && rc.drive.direction != "backward" &&
        rc.drive.direction != "both")
      throw config_error("config: drive.direction must be forward, backward or both");
  }
  {
    cfg::Reader r = top.child("solver");
    rc.solver.method = r.get_string("method", rc.solver.method);
    rc.solver.tol = r.get_double("tol", rc.solver.tol);
    rc.solver.t_max = r.get_double("t_max", rc.solver.t_max);
    rc.solver.ode_tol = r.get_double("ode_tol", rc.solver.ode_tol);
    if (rc.solver.method != "auto" && rc.solver.method != "quantum" &&
        rc.solver.method != "semiclassical" && rc.solver.method != "linear")
      throw config_error("config: solver.method must be auto, quantum, semiclassical or linear");
    if (rc.solver.tol < 0.0 || !std::isfinite(rc.solver.tol))
      throw config_error("config: solver.tol must be >= 0 (0 selects the per-method default)");
  }
  {
    cfg::Reader r = top.child("sweep");
    rc.sweep.axis = r.get_string("axis", rc.sweep.axis);
    rc.sweep.from = r.get_double("from", rc.sweep.from);
    rc.sweep.to = r.get_double("to", rc.sweep.to);
    rc.sweep.points = r.get_int("points", rc.sweep.points);
    rc.sweep.log_spacing = r.get_bool("log", rc.sweep.log_spacing);
    if (rc.sweep.axis != "power" && rc.sweep.axis != "frequency")
      throw config_error("config: sweep.axis must be power or frequency");
    if (rc.sweep.points < 2) throw config_error("config: sweep.points must be >= 2");
    if (rc.sweep.log_spacing && (rc.sweep.from <= 0.0 || rc.sweep.to <= 0.0))
      throw config_error("config: log sweep endpoints must be > 0");
  }
  {
    cfg::Reader r = top.child("fieldmap");
    rc.fieldmap.plane = r.get_string("plane", rc.fieldmap.plane);
    rc.fieldmap.offset = r.get_double("offset", rc.fieldmap.offset);
    rc.fieldmap.extent = r.get_double("extent", rc.fieldmap.extent);
    rc.fieldmap.resolution = r.get_int("resolution", rc.fieldmap.resolution);
    if (rc.fieldmap.plane != "xz" && rc.fieldmap.plane != "xy")
      throw config_error("config: fieldmap.plane must be xz or xy");
    if (rc.fieldmap.resolution < 2) throw config_error("config: fieldmap.resolution must be >= 2");
    if (!(rc.fieldmap.extent > 0.0)) throw config_error("config: fieldmap.extent must be > 0");
  }
  {
    cfg::Reader r = top.child("optimize");
    rc.optimize.dimer_mode = r.get_bool("dimer_mode", rc.optimize.dimer_mode);
    rc.optimize.n_perp = r.get_int("n_perp", rc.optimize.n_perp);
    rc.optimize.starts = r.get_int("starts", rc.optimize.starts);
    rc.optimize.max_iters = r.get_int("max_iters", rc.optimize.max_iters);
    rc.optimize.grad_tol = r.get_double("grad_tol", rc.optimize.grad_tol);
    rc.optimize.step0 = r.get_double("step", rc.optimize.step0);
    rc.optimize.fd_step = r.get_double("fd_step", rc.optimize.fd_step);
    rc.optimize.seed = static_cast<std::uint64_t>(
        r.get_double("seed", static_cast<double>(rc.optimize.seed)));
    static const char* names[n_opt_params] = {"a1", "delta_a", "L", "delta_half",
                                              "rabi_amplitude"};
    for (int i = 0; i < n_opt_params; ++i) {
      if (!r.has_child(names[i])) continue;
      cfg::Reader b = r.child(names[i]);
      rc.optimize.bounds.lo[i] = b.get_double("lo", rc.optimize.bounds.lo[i]);
      rc.optimize.bounds.hi[i] = b.get_double("hi", rc.optimize.bounds.hi[i]);
      rc.optimize.frozen[i] = b.get_bool("frozen", rc.optimize.frozen[i]);
    }
  }
  {
    cfg::Reader r = top.child("scaling");
    rc.scaling.a = r.get_double("a", rc.scaling.a);
    rc.scaling.L = r.get_double("L", rc.scaling.L);
    rc.scaling.n_perp_list = r.get_int_list("n_perp_list", rc.scaling.n_perp_list);
    for (int n : rc.scaling.n_perp_list)
      if (n < 2) throw config_error("config: scaling.n_perp_list entries must be >= 2");
  }
  {
    cfg::Reader r = top.child("single_atom");
    rc.single_atom.rabi_amplitude = r.get_double("rabi_amplitude", rc.single_atom.rabi_amplitude);
    rc.single_atom.delta = r.get_double("delta", rc.single_atom.delta);
    rc.single_atom.n_thermal = r.get_double("n_thermal", rc.single_atom.n_thermal);
  }
  {
    cfg::Reader r = top.child("output");
    rc.output.directory = r.get_string("directory", rc.output.directory);
    rc.output.write_rho = r.get_bool("write_rho", rc.output.write_rho);
  }

  std::vector<std::string> unknown;
  cfg::collect_unused(root, "", unknown);
  if (!unknown.empty()) {
    std::string msg = "config: unrecognised entries:";
    for (const auto& u : unknown) msg += "\n  " + u;
    throw config_error(msg);
  }
  return rc;
}

inline RunConfig parse_config_text(const std::string& text) {
  return bind_config(cfg::parse_text(text));
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw io_error("error reading config file '" + path + "'");
  return parse_config_text(ss.str());
}

// render the system/drive blocks back out (used to save optimiser results
// as a runnable config)
inline std::string config_to_text(const SystemConfig& sys, double rabi_amplitude,
                                  const std::string& direction = "both") {
  std::ostringstream out;
  out.precision(17);  // doubles survive the round trip bit-exactly
  out << "version 1\n\n";
  out << "system {\n";
  out << "  n_perp " << sys.n_perp << "\n";
  out << "  dimer_mode " << (sys.dimer_mode ? "true" : "false") << "\n";
  out << "  a1 " << sys.a1 << "\n";
  out << "  delta_a " << sys.delta_a << "\n";
  out << "  L " << sys.L << "\n";
  out << "  delta_half " << sys.delta_half << "\n";
  out << "}\n\n";
  out << "drive {\n";
  out << "  rabi_amplitude " << rabi_amplitude << "\n";
  out << "  direction " << direction << "\n";
  out << "}\n";
  return out.str();
}

}  // namespace twinlat
