#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pairhop/detail/parallel.hpp"
#include "pairhop/errors.hpp"
#include "pairhop/fock.hpp"

namespace pairhop {

enum class ParitySector { Even, Odd, Full };
enum class Phase { Mott, PSF, SF };

inline const char* to_string(ParitySector s) {
  switch (s) {
    case ParitySector::Even: return "even";
    case ParitySector::Odd: return "odd";
    case ParitySector::Full: return "full";
  }
  return "?";
}

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Mott: return "MOTT";
    case Phase::PSF: return "PSF";
    case Phase::SF: return "SF";
  }
  return "?";
}

inline ParitySector parse_sector(const std::string& s) {
  if (s == "even") return ParitySector::Even;
  if (s == "odd") return ParitySector::Odd;
  if (s == "full") return ParitySector::Full;
  throw ConfigError("unknown sector '" + s + "' (expected even, odd or full)");
}

struct EqParams {
  double mu = 0.0;
  double U = 1.0;
  double J = 0.0;
  double J1 = 0.0;
  ParitySector sector = ParitySector::Even;

  void validate() const {
    if (!(U > 0.0)) throw std::invalid_argument("EqParams: U must be > 0");
    if (J < 0.0 || J1 < 0.0) throw std::invalid_argument("EqParams: hoppings must be >= 0");
    if (!std::isfinite(mu) || !std::isfinite(J) || !std::isfinite(J1))
      throw std::invalid_argument("EqParams: non-finite parameter");
    if (J1 > 0.0 && sector != ParitySector::Full)
      throw std::invalid_argument("EqParams: J1 > 0 mixes parities; use the full sector");
  }
};

enum class GwInit { Auto, Normal, Broken };

struct GwOptions {
  int n_max = 0;  // 0: automatic
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 20000;
  double classify_tol = 1e-4;
  bool fidelity = true;
  GwInit init = GwInit::Auto;
};

struct GwSolution {
  Ket site_state;
  cplx psi1{0.0, 0.0};
  cplx psi2{0.0, 0.0};
  double density = 0.0;
  double energy = 0.0;
  CatFit f_cat;
  Phase phase = Phase::Mott;
  bool converged = false;
  int iterations = 0;
  int n_max = 0;
};

inline int gw_auto_n_max(const EqParams& p) {
  const double est = std::max(p.mu, 0.0) / (p.U - 2.0 * p.J);
  return static_cast<int>(std::min(120.0, std::ceil(3.0 * est) + 10.0));
}

inline cplx expect_a(const CVector& c) {
  cplx s = 0.0;
  for (Eigen::Index n = 1; n < c.size(); ++n) s += std::conj(c[n - 1]) * c[n] * std::sqrt(double(n));
  return s;
}

inline cplx expect_a2(const CVector& c) {
  cplx s = 0.0;
  for (Eigen::Index n = 2; n < c.size(); ++n) s += std::conj(c[n - 2]) * c[n] * std::sqrt(double(n) * (n - 1));
  return s;
}

// <-mu n + U/2 n(n-1)> - J|<a^2>|^2 - J1|<a>|^2 per site.
inline double gw_energy(const Ket& k, const EqParams& p) {
  const CVector& c = k.amplitudes;
  double local = 0.0;
  for (Eigen::Index n = 0; n < c.size(); ++n) local += std::norm(c[n]) * (-p.mu * n + 0.5 * p.U * n * (n - 1.0));
  return local - p.J * std::norm(expect_a2(c)) - p.J1 * std::norm(expect_a(c));
}

inline CMatrix mean_field_hamiltonian(const EqParams& p, int n_max, cplx psi1, cplx psi2) {
  FockSpace s(n_max);
  const CMatrix a = annihilation(s);
  const CMatrix a2 = a * a;
  CMatrix h = CMatrix::Zero(n_max + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n) h(n, n) = -p.mu * n + 0.5 * p.U * n * (n - 1.0);
  h -= p.J * (std::conj(psi2) * a2 + psi2 * CMatrix(a2.adjoint()));
  h -= p.J1 * (std::conj(psi1) * a + psi1 * CMatrix(a.adjoint()));
  return h;
}

inline Phase classify(cplx psi1, cplx psi2, double tol = 1e-4) {
  if (std::abs(psi1) >= tol) return Phase::SF;
  if (std::abs(psi2) >= tol) return Phase::PSF;
  return Phase::Mott;
}

inline Phase classify(const GwSolution& sol, double tol = 1e-4) { return classify(sol.psi1, sol.psi2, tol); }

namespace detail {

struct GwRun {
  Eigen::VectorXd c;  // amplitudes on the full Fock basis
  double psi1 = 0.0, psi2 = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Damped self-consistency with real fields. Real seeds keep the mean-field Hamiltonian real and
// symmetric throughout, which doubles as a gauge choice.
inline GwRun gw_iterate(const EqParams& p, int n_max, double psi1, double psi2, const GwOptions& opt) {
  const int step = p.sector == ParitySector::Full ? 1 : 2;
  const int first = p.sector == ParitySector::Odd ? 1 : 0;
  std::vector<int> occ;
  for (int n = first; n <= n_max; n += step) occ.push_back(n);
  const int d = static_cast<int>(occ.size());
  if (d == 0) throw std::invalid_argument("gw_solve: n_max too small for the sector");

  Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(d, d), pair = Eigen::MatrixXd::Zero(d, d),
                  single = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const double n = occ[i];
    h0(i, i) = -p.mu * n + 0.5 * p.U * n * (n - 1.0);
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (occ[j] == occ[i] + 2) pair(i, j) = pair(j, i) = std::sqrt(double(occ[j]) * (occ[j] - 1));
      if (occ[j] == occ[i] + 1) single(i, j) = single(j, i) = std::sqrt(double(occ[j]));
    }

  GwRun run;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  Eigen::VectorXd v;
  auto measure = [&](double& m1, double& m2) {
    es.compute(h0 - p.J * psi2 * pair - p.J1 * psi1 * single);
    v = es.eigenvectors().col(0);
    m1 = v.dot(single * v) / 2.0;
    m2 = v.dot(pair * v) / 2.0;
  };
  for (int it = 1; it <= opt.max_iter; ++it) {
    double m1, m2;
    measure(m1, m2);
    run.iterations = it;
    const double change = std::max(std::abs(m1 - psi1), std::abs(m2 - psi2));
    if (change < opt.tol) {
      psi1 = m1;
      psi2 = m2;
      run.converged = true;
      break;
    }
    psi1 = (1.0 - opt.damping) * psi1 + opt.damping * m1;
    psi2 = (1.0 - opt.damping) * psi2 + opt.damping * m2;
  }
  // one final diagonalization at the accepted fields so the state and its fields agree
  double m1, m2;
  measure(m1, m2);
  run.psi1 = m1;
  run.psi2 = m2;
  run.c = Eigen::VectorXd::Zero(n_max + 1);
  for (int i = 0; i < d; ++i) run.c[occ[i]] = v[i];
  return run;
}

// Rotate by exp(i n theta) so psi1 (SF) or psi2 (PSF) is real and nonnegative.
inline void gauge_fix(CVector& c, Phase phase) {
  double theta = 0.0;
  if (phase == Phase::SF)
    theta = -std::arg(expect_a(c));
  else if (phase == Phase::PSF)
    theta = -std::arg(expect_a2(c)) / 2.0;
  else
    return;
  for (Eigen::Index n = 0; n < c.size(); ++n) c[n] *= std::polar(1.0, theta * n);
}

}  // namespace detail

inline GwSolution gw_solve(const EqParams& p, const GwOptions& opt = {}) {
  p.validate();
  if (p.J >= p.U / 2.0)
    throw InstabilityError("gw_solve: J >= U/2, the variational energy is unbounded from below");
  const int n_max = opt.n_max > 0 ? opt.n_max : gw_auto_n_max(p);
  if (n_max < 2) throw std::invalid_argument("gw_solve: n_max must be >= 2");

  const double psi2_seed = std::max(1.0, p.mu / (p.U - 2.0 * p.J));
  struct Seed {
    double psi1, psi2;
  };
  std::vector<Seed> seeds;
  if (opt.init != GwInit::Broken) seeds.push_back({0.0, 0.0});
  if (opt.init != GwInit::Normal) {
    seeds.push_back({0.0, psi2_seed});
    if (p.sector == ParitySector::Full && p.J1 > 0.0) seeds.push_back({std::sqrt(psi2_seed), psi2_seed});
  }

  std::optional<detail::GwRun> best;
  double best_energy = std::numeric_limits<double>::infinity();
  for (const Seed& s : seeds) {
    detail::GwRun run = detail::gw_iterate(p, n_max, s.psi1, s.psi2, opt);
    const double e = gw_energy(Ket{run.c.cast<cplx>(), false}, p);
    // strict improvement needed; the normal seed wins exact ties
    if (!best || e < best_energy - 1e-12) {
      best = run;
      best_energy = e;
    }
  }

  GwSolution sol;
  sol.n_max = n_max;
  sol.converged = best->converged;
  sol.iterations = best->iterations;
  CVector c = best->c.cast<cplx>();
  sol.phase = classify(expect_a(c), expect_a2(c), opt.classify_tol);
  detail::gauge_fix(c, sol.phase);
  sol.site_state = Ket{c, false};
  sol.psi1 = expect_a(c);
  sol.psi2 = expect_a2(c);
  for (Eigen::Index n = 0; n < c.size(); ++n) sol.density += n * std::norm(c[n]);
  sol.energy = gw_energy(sol.site_state, p);
  if (opt.fidelity) sol.f_cat = cat_fidelity(sol.site_state);
  return sol;
}

struct GwRow {
  EqParams params;
  std::optional<GwSolution> solution;
  std::string error;
  double seconds = 0.0;  // wall time spent on this point
};

// Solves every point; failures are recorded per row instead of aborting the sweep.
inline std::vector<GwRow> gw_sweep(const std::vector<EqParams>& points, const GwOptions& opt = {}, int workers = 0) {
  std::vector<GwRow> rows(points.size());
  detail::parallel_for(points.size(), workers, [&](std::size_t i) {
    rows[i].params = points[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rows[i].solution = gw_solve(points[i], opt);
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
    rows[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  return rows;
}

inline std::vector<EqParams> mu_j_grid(const EqParams& tmpl, double mu_lo, double mu_hi, int n_mu, double J_lo,
                                       double J_hi, int n_J) {
  if (n_mu < 1 || n_J < 1) throw std::invalid_argument("grid: counts must be >= 1");
  std::vector<EqParams> out;
  for (int j = 0; j < n_J; ++j)
    for (int m = 0; m < n_mu; ++m) {
      EqParams p = tmpl;
      p.mu = n_mu == 1 ? mu_lo : mu_lo + (mu_hi - mu_lo) * m / (n_mu - 1);
      p.J = n_J == 1 ? J_lo : J_lo + (J_hi - J_lo) * j / (n_J - 1);
      out.push_back(p);
    }
  return out;
}

// Energy difference between the best even-sector and odd-sector minima. A sign change along a
// parameter line marks a first-order transition between the two restricted phases.
inline double gw_sector_splitting(EqParams p, GwOptions opt = {}) {
  opt.fidelity = false;
  p.J1 = 0.0;
  p.sector = ParitySector::Even;
  const double even = gw_solve(p, opt).energy;
  p.sector = ParitySector::Odd;
  return even - gw_solve(p, opt).energy;
}

// Chemical potentials in [mu_lo, mu_hi] where the even and odd minima cross, refined by bisection.
inline std::vector<double> gw_parity_crossings(EqParams p, double mu_lo, double mu_hi, int scan = 200,
                                               const GwOptions& opt = {}) {
  std::vector<double> roots;
  auto f = [&](double mu) {
    p.mu = mu;
    return gw_sector_splitting(p, opt);
  };
  double x0 = mu_lo, f0 = f(mu_lo);
  for (int k = 1; k <= scan; ++k) {
    const double x1 = mu_lo + (mu_hi - mu_lo) * k / scan, f1 = f(x1);
    if ((f0 < 0.0) != (f1 < 0.0)) {
      double a = x0, b = x1, fa = f0;
      for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
        const double m = 0.5 * (a + b), fm = f(m);
        if ((fm < 0.0) == (fa < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

}  // namespace pairhop
