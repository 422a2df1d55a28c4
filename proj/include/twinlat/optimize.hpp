#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <random>
#include <vector>

#include "twinlat/master_equation.hpp"
#include "twinlat/mean_field.hpp"
#include "twinlat/scattering.hpp"

namespace twinlat {

// search space for the geometry/drive optimiser (units: lambda0, gamma0)
struct OptParams {
  double a1 = 1.0 / 3.0;
  double delta_a = 0.1;
  double L = 0.1;
  double delta_half = -1.0;       // full inter-array detuning splitting
  double rabi_amplitude = 0.5;
};

inline constexpr int n_opt_params = 5;

inline Eigen::VectorXd to_vector(const OptParams& p) {
  Eigen::VectorXd v(n_opt_params);
  v << p.a1, p.delta_a, p.L, p.delta_half, p.rabi_amplitude;
  return v;
}

inline OptParams from_vector(const Eigen::VectorXd& v) {
  if (v.size() != n_opt_params) throw config_error("from_vector: expected 5 parameters");
  return OptParams{v(0), v(1), v(2), v(3), v(4)};
}

struct OptBounds {
  std::array<double, n_opt_params> lo{0.20, 0.00, 0.05, -4.0, 0.10};
  std::array<double, n_opt_params> hi{0.50, 0.20, 0.30, 4.0, 2.00};
};

struct OptSettings {
  OptBounds bounds;
  std::array<bool, n_opt_params> frozen{};  // pinned to the initial value
  bool dimer_mode = true;
  int n_perp = 1;
  int starts = 16;
  int max_iters = 150;
  double grad_tol = 1e-4;   // on the unit-box gradient
  double step0 = 0.05;      // initial ascent step in unit-box coordinates
  double fd_step = 1e-3;    // relative central-difference step
  std::uint64_t seed = 12345;
  bool start_at_center = false;  // start 0 uses the initial point, not a draw
  int workers = 1;
};

// central differences, step h_i = h_rel * max(1, |x_i|); exact for quadratics
inline Eigen::VectorXd finite_diff_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                            const Eigen::VectorXd& x, double h_rel = 1e-3) {
  if (!(h_rel > 0.0)) throw config_error("finite_diff_gradient: step must be > 0");
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double h = h_rel * std::max(1.0, std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// squared figure of merit M^2 for a candidate geometry, in single-atom
// normalised units.  quantum steady state up to max_quantum_atoms, mean
// field beyond.
inline double m_squared_objective(const OptParams& p, bool dimer_mode, int n_perp) {
  SystemConfig cfg;
  cfg.n_perp = n_perp;
  cfg.dimer_mode = dimer_mode;
  cfg.a1 = p.a1;
  cfg.delta_a = p.delta_a;
  cfg.L = p.L;
  cfg.delta_half = p.delta_half;
  const AtomSystem sys = build_system(cfg);

  Eigen::VectorXcd sf, sb;
  if (sys.n_total <= max_quantum_atoms) {
    const Liouvillian lf = build_liouvillian(sys, p.rabi_amplitude, Direction::forward);
    const Liouvillian lb = build_liouvillian(sys, p.rabi_amplitude, Direction::backward);
    sf = expectation_sigma(steady_state(lf));
    sb = expectation_sigma(steady_state(lb));
  } else {
    const CouplingMatrices cm = coupling_matrices(sys);
    const MeanFieldProblem pf(sys, cm, drive_vector(sys, p.rabi_amplitude, Direction::forward));
    const MeanFieldProblem pb(sys, cm, drive_vector(sys, p.rabi_amplitude, Direction::backward));
    sf = integrate_to_steady(pf).state.sigma;
    sb = integrate_to_steady(pb).state.sigma;
  }
  const CrossSectionReport r = cross_section_report(sys, p.rabi_amplitude, sf, sb);
  return r.m_efficiency * r.m_efficiency;
}

struct OptIterate {
  int start = 0;
  int iter = 0;
  OptParams params;
  double value = 0.0;
  double grad_norm = 0.0;
};

struct OptStart {
  OptParams initial;
  OptParams final;
  double value = 0.0;
  int iters = 0;
};

struct OptResult {
  OptParams best;
  double best_value = 0.0;
  int best_start = 0;
  std::vector<OptStart> starts;
  std::vector<OptIterate> trace;
};

namespace detail {

inline Eigen::VectorXd clamp_unit(Eigen::VectorXd y) {
  for (int i = 0; i < y.size(); ++i) y(i) = std::min(1.0, std::max(0.0, y(i)));
  return y;
}

}  // namespace detail

// projected gradient ascent over the bounded parameter box, with multi-start.
// all iterates live in unit-box coordinates y in [0,1]^5 so a single relative
// step size serves every parameter.  the physics objective is the default;
// the function-valued overload exists so the algorithm itself is testable.
inline OptResult optimize(const OptSettings& s,
                          const std::function<double(const OptParams&)>& objective,
                          const OptParams& initial_center = OptParams{}) {
  Eigen::VectorXd lo(n_opt_params), hi(n_opt_params);
  for (int i = 0; i < n_opt_params; ++i) {
    lo(i) = s.bounds.lo[i];
    hi(i) = s.bounds.hi[i];
    if (!(hi(i) > lo(i)) && !s.frozen[i])
      throw config_error("optimize: bounds must satisfy lo < hi for free parameters");
  }
  if (s.starts < 1 || s.max_iters < 1) throw config_error("optimize: starts and max_iters must be >= 1");

  const Eigen::VectorXd center = to_vector(initial_center);
  const auto to_params = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd x(n_opt_params);
    for (int i = 0; i < n_opt_params; ++i)
      x(i) = s.frozen[i] ? center(i) : lo(i) + y(i) * (hi(i) - lo(i));
    return from_vector(x);
  };
  const auto value_of = [&](const Eigen::VectorXd& y) { return objective(to_params(y)); };
  // box-aware central differences: sample points are clamped to the box and
  // the actual spacing divides, so gradients stay meaningful at the faces
  const auto gradient_of = [&](const Eigen::VectorXd& y, double fy) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_opt_params);
    for (int i = 0; i < n_opt_params; ++i) {
      if (s.frozen[i]) continue;
      Eigen::VectorXd yp = y, ym = y;
      yp(i) = std::min(1.0, y(i) + s.fd_step);
      ym(i) = std::max(0.0, y(i) - s.fd_step);
      const double span = yp(i) - ym(i);
      if (span <= 0.0) continue;
      const double fp = yp(i) == y(i) ? fy : value_of(yp);
      const double fm = ym(i) == y(i) ? fy : value_of(ym);
      g(i) = (fp - fm) / span;
    }
    return g;
  };

  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Eigen::VectorXd> y0(s.starts);
  for (int k = 0; k < s.starts; ++k) {
    y0[k].resize(n_opt_params);
    for (int i = 0; i < n_opt_params; ++i) y0[k](i) = uni(rng);
  }
  if (s.start_at_center) {
    // start 0 at the supplied initial point, projected into the box
    for (int i = 0; i < n_opt_params; ++i)
      y0[0](i) = s.frozen[i] || !(hi(i) > lo(i))
                     ? 0.5
                     : std::clamp((center(i) - lo(i)) / (hi(i) - lo(i)), 0.0, 1.0);
  }

  std::vector<OptStart> starts(s.starts);
  std::vector<std::vector<OptIterate>> traces(s.starts);
  const auto run_start = [&](int k) {
    Eigen::VectorXd y = y0[k];
    double fy = value_of(y);
    OptStart st;
    st.initial = to_params(y);
    double step = s.step0;
    int iter = 0;
    for (; iter < s.max_iters; ++iter) {
      const Eigen::VectorXd g = gradient_of(y, fy);
      const double gnorm = g.norm();
      traces[k].push_back({k, iter, to_params(y), fy, gnorm});
      if (gnorm < s.grad_tol) break;
      // backtracking line search along the projected gradient
      bool improved = false;
      double alpha = std::min(step * 2.0, 0.25);
      for (int half = 0; half < 20; ++half) {
        const Eigen::VectorXd yt = detail::clamp_unit(y + alpha * g / gnorm);
        if ((yt - y).norm() < 1e-12) break;
        const double ft = value_of(yt);
        if (ft > fy + 1e-12) {
          y = yt;
          fy = ft;
          step = alpha;
          improved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!improved) break;  // no ascent direction left at this resolution
    }
    st.final = to_params(y);
    st.value = fy;
    st.iters = iter;
    starts[k] = st;
  };
  parallel_for(s.starts, run_start, s.workers);

  OptResult result;
  result.best_value = -1.0;
  for (int k = 0; k < s.starts; ++k) {
    result.starts.push_back(starts[k]);
    result.trace.insert(result.trace.end(), traces[k].begin(), traces[k].end());
    if (starts[k].value > result.best_value) {
      result.best_value = starts[k].value;
      result.best = starts[k].final;
      result.best_start = k;
    }
  }
  return result;
}

inline OptResult optimize(const OptSettings& s, const OptParams& initial_center = OptParams{}) {
  return optimize(
      s, [&s](const OptParams& p) { return m_squared_objective(p, s.dimer_mode, s.n_perp); },
      initial_center);
}

}  // namespace twinlat
