#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pairhop/errors.hpp"

namespace pairhop::detail {

struct Rk45Options {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h_init = 1e-3;
  double h_min_rel = 1e-14;  // relative to the integration span
  long max_steps = 50'000'000;
};

struct Rk45Stats {
  long accepted = 0;
  long rejected = 0;
};

// Dormand-Prince 5(4). The state is advanced from t0 through every time in `samples` (ascending,
// >= t0); observe(t, y) fires at each sample, with steps clipped to land on it exactly.
// post(y) runs after each accepted step (used for Hermitization).
template <class Rhs, class Observe, class Post>
Rk45Stats rk45_integrate(Rhs&& rhs, Eigen::VectorXcd y, double t0, const std::vector<double>& samples,
                         Observe&& observe, Post&& post, const Rk45Options& opt = {}) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  Rk45Stats stats;
  if (samples.empty()) return stats;
  const double span = std::max(samples.back() - t0, 1e-300);
  const double h_min = opt.h_min_rel * span;
  double t = t0, h = std::min(opt.h_init, span);
  Eigen::VectorXcd k1 = rhs(t, y), k2, k3, k4, k5, k6, k7, ytmp, ynew;
  long steps = 0;
  for (double target : samples) {
    while (t < target) {
      if (++steps > opt.max_steps) throw StiffnessError("rk45: step budget exhausted at t=" + std::to_string(t));
      bool last = false;
      double hs = h;
      if (t + hs >= target) {
        hs = target - t;
        last = true;
      }
      ytmp = y + hs * a21 * k1;
      k2 = rhs(t + c2 * hs, ytmp);
      ytmp = y + hs * (a31 * k1 + a32 * k2);
      k3 = rhs(t + c3 * hs, ytmp);
      ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
      k4 = rhs(t + c4 * hs, ytmp);
      ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      k5 = rhs(t + c5 * hs, ytmp);
      ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      k6 = rhs(t + hs, ytmp);
      ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = rhs(t + hs, ynew);
      const Eigen::VectorXcd err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double en = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        en = std::max(en, std::abs(err[i]) / sc);
      }
      if (!std::isfinite(en)) en = 1e10;
      if (en <= 1.0) {
        t = last ? target : t + hs;
        y = ynew;
        post(y);
        k1 = rhs(t, y);  // post() may move y slightly, so FSAL reuse of k7 is skipped
        ++stats.accepted;
        const double fac = en == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(en, -0.2));
        if (!last || fac < 1.0) h = hs * fac;
      } else {
        ++stats.rejected;
        h = hs * std::max(0.1, 0.9 * std::pow(en, -0.2));
      }
      if (h < h_min)
        throw StiffnessError("rk45: step size underflow (h=" + std::to_string(h) + ") at t=" + std::to_string(t));
    }
    observe(t, y);
  }
  return stats;
}

}  // namespace pairhop::detail
