#pragma once

#include <algorithm>
#include <cmath>

#include "twinlat/common.hpp"

namespace twinlat {

struct OdeStats {
  double t_final = 0.0;
  double dt_last = 0.0;
  long steps = 0;
  long rejected = 0;
};

// embedded cash-karp 4(5) with standard step-size control.  State is any
// Eigen matrix/vector type (real or complex); rhs(y, dy) fills dy.
template <class State, class Rhs>
OdeStats integrate_adaptive_rkck(Rhs&& rhs, State& y, double t0, double t1,
                                 double dt0, double atol, double rtol) {
  // cash-karp tableau
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 3.0 / 10.0, a42 = -9.0 / 10.0, a43 = 6.0 / 5.0;
  static constexpr double a51 = -11.0 / 54.0, a52 = 5.0 / 2.0, a53 = -70.0 / 27.0, a54 = 35.0 / 27.0;
  static constexpr double a61 = 1631.0 / 55296.0, a62 = 175.0 / 512.0, a63 = 575.0 / 13824.0,
                          a64 = 44275.0 / 110592.0, a65 = 253.0 / 4096.0;
  static constexpr double b1 = 37.0 / 378.0, b3 = 250.0 / 621.0, b4 = 125.0 / 594.0, b6 = 512.0 / 1771.0;
  static constexpr double e1 = b1 - 2825.0 / 27648.0, e3 = b3 - 18575.0 / 48384.0,
                          e4 = b4 - 13525.0 / 55296.0, e5 = -277.0 / 14336.0, e6 = b6 - 1.0 / 4.0;

  OdeStats st;
  double t = t0;
  double dt = dt0 > 0.0 ? dt0 : 1e-3 * (t1 - t0);
  State k1, k2, k3, k4, k5, k6, ytmp, ynew, yerr;
  while (t < t1) {
    dt = std::min(dt, t1 - t);
    rhs(y, k1);
    ytmp = y + dt * a21 * k1;
    rhs(ytmp, k2);
    ytmp = y + dt * (a31 * k1 + a32 * k2);
    rhs(ytmp, k3);
    ytmp = y + dt * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(ytmp, k4);
    ytmp = y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(ytmp, k5);
    ytmp = y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(ytmp, k6);
    ynew = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b6 * k6);
    yerr = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6);

    const double scale =
        atol + rtol * std::max(y.cwiseAbs().maxCoeff(), ynew.cwiseAbs().maxCoeff());
    const double err = yerr.cwiseAbs().maxCoeff() / scale;
    if (err <= 1.0) {
      t += dt;
      y.swap(ynew);
      ++st.steps;
      st.dt_last = dt;
      dt *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 1.0, 5.0);
    } else {
      ++st.rejected;
      dt *= std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.9);
    }
    if (dt < 1e-14 * std::max(1.0, std::abs(t)))
      throw solver_error("adaptive step size underflow at t = " + std::to_string(t));
  }
  st.t_final = t;
  return st;
}

}  // namespace twinlat
