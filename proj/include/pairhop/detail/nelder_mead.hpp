#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace pairhop::detail {

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

struct SimplexOptions {
  double initial_step = 0.25;
  double f_tol = 1e-10;   // spread of function values across the simplex
  double x_tol = 1e-6;    // simplex diameter
  int max_evaluations = 4000;
};

// Standard Nelder-Mead with the usual coefficients (1, 2, 1/2, 1/2).
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& start,
                                 const SimplexOptions& opt = {}) {
  const int n = static_cast<int>(start.size());
  std::vector<Eigen::VectorXd> pts(n + 1, start);
  std::vector<double> vals(n + 1);
  for (int i = 0; i < n; ++i) {
    double h = opt.initial_step;
    if (std::abs(start[i]) > 1e-12) h = std::max(h, 0.05 * std::abs(start[i]));
    pts[i + 1][i] += h;
  }
  SimplexResult res;
  for (int i = 0; i <= n; ++i) vals[i] = f(pts[i]);
  res.evaluations = n + 1;

  std::vector<int> order(n + 1);
  while (res.evaluations < opt.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
    const int best = order.front(), worst = order.back(), second = order[n - 1];

    double diam = 0.0;
    for (int i = 0; i <= n; ++i) diam = std::max(diam, (pts[i] - pts[best]).norm());
    if (std::abs(vals[worst] - vals[best]) <= opt.f_tol && diam <= opt.x_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= n;

    Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    double fr = f(xr);
    ++res.evaluations;
    if (fr < vals[best]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      double fe = f(xe);
      ++res.evaluations;
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                 : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    double fc = f(xc);
    ++res.evaluations;
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = f(pts[i]);
      ++res.evaluations;
    }
  }
  int best = static_cast<int>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

}  // namespace pairhop::detail
