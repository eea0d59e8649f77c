#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "pairhop/detail/nelder_mead.hpp"
#include "pairhop/errors.hpp"

namespace pairhop {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct FockSpace {
  int n_max;

  explicit FockSpace(int n) : n_max(n) {
    if (n < 1) throw std::invalid_argument("FockSpace: n_max must be >= 1");
  }
  int dim() const { return n_max + 1; }
};

struct Operator {
  CMatrix matrix;
  bool truncation_warning = false;
};

struct Ket {
  CVector amplitudes;
  bool truncation_warning = false;
};

struct DensityOp {
  CMatrix matrix;
};

struct CatFit {
  double fidelity = 0.0;
  cplx alpha_star{0.0, 0.0};
  int parity = +1;
  bool converged = false;
};

// Poisson tail beyond n_max stays below ~1e-10 when this holds.
inline bool truncation_safe(int n_max, cplx alpha) {
  const double r = std::abs(alpha);
  return r * r + 6.0 * r + 9.0 <= static_cast<double>(n_max);
}

inline CMatrix annihilation(const FockSpace& s) {
  CMatrix a = CMatrix::Zero(s.dim(), s.dim());
  for (int n = 1; n <= s.n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline CMatrix creation(const FockSpace& s) { return annihilation(s).adjoint(); }

inline CMatrix number_op(const FockSpace& s) {
  CMatrix n = CMatrix::Zero(s.dim(), s.dim());
  for (int k = 0; k <= s.n_max; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

inline CMatrix parity_op(const FockSpace& s) {
  CMatrix p = CMatrix::Zero(s.dim(), s.dim());
  for (int k = 0; k <= s.n_max; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return p;
}

// exp(alpha a^dag - alpha^* a) through Eigen's scaling-and-squaring Pade route.
inline Operator displacement(const FockSpace& s, cplx alpha) {
  const CMatrix a = annihilation(s);
  const CMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  Operator out;
  out.matrix = gen.exp();
  out.truncation_warning = !truncation_safe(s.n_max, alpha);
  return out;
}

namespace detail {

// log|c_n| and arg(c_n) of the untruncated coherent amplitude e^{-|a|^2/2} a^n / sqrt(n!).
inline void coherent_log_amplitudes(int n_max, cplx alpha, std::vector<double>& logmag,
                                    std::vector<double>& phase) {
  logmag.assign(n_max + 1, -INFINITY);
  phase.assign(n_max + 1, 0.0);
  const double r = std::abs(alpha);
  const double th = std::arg(alpha);
  if (r == 0.0) {
    logmag[0] = 0.0;
    return;
  }
  const double lr = std::log(r);
  for (int n = 0; n <= n_max; ++n) {
    logmag[n] = -0.5 * r * r + n * lr - 0.5 * std::lgamma(n + 1.0);
    phase[n] = n * th;
  }
}

// Amplitudes with the largest entry scaled to unit modulus, then normalized on the basis.
inline CVector normalized_from_logs(const std::vector<double>& logmag, const std::vector<double>& phase,
                                    const std::vector<bool>& keep) {
  double top = -INFINITY;
  for (size_t n = 0; n < logmag.size(); ++n)
    if (keep[n]) top = std::max(top, logmag[n]);
  CVector v = CVector::Zero(static_cast<Eigen::Index>(logmag.size()));
  if (!std::isfinite(top)) return v;
  for (size_t n = 0; n < logmag.size(); ++n)
    if (keep[n] && std::isfinite(logmag[n])) v[n] = std::polar(std::exp(logmag[n] - top), phase[n]);
  const double nrm = v.norm();
  if (nrm > 0.0) v /= nrm;
  return v;
}

}  // namespace detail

inline Ket coherent_state(const FockSpace& s, cplx alpha) {
  std::vector<double> lm, ph;
  detail::coherent_log_amplitudes(s.n_max, alpha, lm, ph);
  std::vector<bool> keep(s.dim(), true);
  return {detail::normalized_from_logs(lm, ph, keep), !truncation_safe(s.n_max, alpha)};
}

// Normalized |C^P(alpha)> ~ |alpha> + P|-alpha>: only Fock states with (-1)^n = P survive.
inline Ket cat_state(const FockSpace& s, cplx alpha, int parity) {
  if (parity != 1 && parity != -1) throw std::invalid_argument("cat_state: parity must be +1 or -1");
  if (alpha == cplx(0.0, 0.0) && parity == -1) throw DegenerateCatError();
  std::vector<double> lm, ph;
  detail::coherent_log_amplitudes(s.n_max, alpha, lm, ph);
  std::vector<bool> keep(s.dim());
  for (int n = 0; n <= s.n_max; ++n) keep[n] = ((n % 2 == 0) == (parity == 1));
  Ket k{detail::normalized_from_logs(lm, ph, keep), !truncation_safe(s.n_max, alpha)};
  if (k.amplitudes.norm() == 0.0) throw DegenerateCatError();
  return k;
}

inline DensityOp density(const CVector& psi) { return {psi * psi.adjoint()}; }
inline DensityOp density(const Ket& k) { return density(k.amplitudes); }

// Exact (untruncated) matrix elements <m|D(beta)|n> restricted to 0..n_max, from the
// associated-Laguerre closed form. The recurrence runs on
//   g_n = sqrt(k! n! / (n+k)!) L_n^{(k)}(x),  x = |beta|^2,
// so that <n+k|D|n> = e^{-x/2} beta^k / sqrt(k!) * g_n, and the transposed entry uses (-beta^*)^k.
inline CMatrix displacement_elements(int n_max, cplx beta) {
  const int N = n_max + 1;
  CMatrix D = CMatrix::Zero(N, N);
  const double r = std::abs(beta);
  if (r == 0.0) return CMatrix::Identity(N, N);
  const double x = r * r;
  const double th = std::arg(beta);
  const double lr = std::log(r);
  for (int k = 0; k < N; ++k) {
    double logpre = -0.5 * x + k * lr - 0.5 * std::lgamma(k + 1.0);
    const cplx up = std::polar(1.0, k * th);
    const cplx down = std::polar(1.0, k * (std::numbers::pi - th));
    double g_prev = 0.0, g = 1.0;
    for (int n = 0; n + k < N; ++n) {
      const double val = std::exp(logpre) * g;
      D(n + k, n) = val * up;
      if (k > 0) D(n, n + k) = val * down;
      const double g_next =
          ((2.0 * n + 1.0 + k - x) * g - std::sqrt(static_cast<double>(n) * (n + k)) * g_prev) /
          std::sqrt((n + 1.0) * (n + 1.0 + k));
      g_prev = g;
      g = g_next;
      if (std::abs(g) > 1e200) {
        g *= 1e-200;
        g_prev *= 1e-200;
        logpre += 200.0 * std::log(10.0);
      }
    }
  }
  return D;
}

// (2/pi) D(alpha) Pi D(-alpha) = (2/pi) D(2 alpha) Pi.
inline CMatrix wigner_operator(int n_max, cplx alpha) {
  CMatrix W = displacement_elements(n_max, 2.0 * alpha);
  for (int n = 1; n <= n_max; n += 2) W.col(n) *= -1.0;
  return (2.0 / std::numbers::pi) * W;
}

inline cplx wigner_complex(const DensityOp& rho, cplx alpha) {
  const int n_max = static_cast<int>(rho.matrix.rows()) - 1;
  return (wigner_operator(n_max, alpha).cwiseProduct(rho.matrix.transpose())).sum();
}

inline double wigner(const DensityOp& rho, cplx alpha) { return wigner_complex(rho, alpha).real(); }

namespace detail {

inline double cat_overlap(const CMatrix& rho, cplx alpha, int parity) {
  const int n_max = static_cast<int>(rho.rows()) - 1;
  if (parity == -1 && std::abs(alpha) < 1e-9) alpha = (alpha == cplx(0.0, 0.0)) ? cplx(1e-9, 0.0) : 1e-9 * alpha / std::abs(alpha);
  const CVector c = cat_state(FockSpace(n_max), alpha, parity).amplitudes;
  return std::real(c.dot(rho * c));
}

inline cplx canonical_alpha(cplx a) {
  // |C^P(a)> and |C^P(-a)> coincide up to a phase; keep Re a > 0 (or Im a >= 0 on the axis).
  if (a.real() < 0.0 || (a.real() == 0.0 && a.imag() < 0.0)) return -a;
  return a;
}

}  // namespace detail

// max over complex alpha (|alpha| <= sqrt(2<n>) + 2) and both parities of <C|rho|C>.
inline CatFit cat_fidelity(const DensityOp& state) {
  const CMatrix& rho = state.matrix;
  const int n_max = static_cast<int>(rho.rows()) - 1;
  if (n_max < 1) throw std::invalid_argument("cat_fidelity: state dimension must be >= 2");
  double nbar = 0.0;
  for (int n = 0; n <= n_max; ++n) nbar += n * rho(n, n).real();
  nbar = std::max(nbar, 0.0);
  const double rbound = std::sqrt(2.0 * nbar) + 2.0;

  auto clamp = [rbound](cplx a) {
    const double r = std::abs(a);
    return r > rbound ? a * (rbound / r) : a;
  };

  CatFit best;
  best.fidelity = -1.0;
  for (int parity : {+1, -1}) {
    auto objective = [&](const Eigen::VectorXd& v) {
      return -detail::cat_overlap(rho, clamp(cplx(v[0], v[1])), parity);
    };
    struct Seed {
      cplx a;
      double f;
    };
    std::vector<Seed> seeds;
    auto add = [&](cplx a) {
      Eigen::Vector2d v(a.real(), a.imag());
      seeds.push_back({a, objective(v)});
    };
    add(cplx(0.0, 0.0));
    const double r0 = std::sqrt(nbar);
    constexpr int kRadial = 48;
    for (int k = 0; k < 8; ++k) {
      const double th = k * std::numbers::pi / 4.0;
      add(std::polar(r0, th));
      // radial pre-scan along the same ray; guards against <n> being a poor proxy for |alpha|
      Seed ray{0.0, INFINITY};
      for (int j = 1; j <= kRadial; ++j) {
        const cplx a = std::polar(rbound * j / kRadial, th);
        const double f = objective(Eigen::Vector2d(a.real(), a.imag()));
        if (f < ray.f) ray = {a, f};
      }
      seeds.push_back(ray);
    }
    std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.f < b.f; });

    detail::SimplexOptions opt;
    opt.f_tol = 1e-12;
    opt.initial_step = std::max(0.05, 0.1 * rbound / 4.0);
    int runs = 0;
    for (const Seed& s : seeds) {
      if (runs == 4) break;
      ++runs;
      auto res = detail::nelder_mead(objective, Eigen::Vector2d(s.a.real(), s.a.imag()), opt);
      const double fid = -res.value;
      if (fid > best.fidelity + 1e-12 || (parity == 1 && best.fidelity < 0.0)) {
        best.fidelity = fid;
        best.alpha_star = detail::canonical_alpha(clamp(cplx(res.x[0], res.x[1])));
        best.parity = parity;
        best.converged = res.converged;
      }
    }
  }
  best.fidelity = std::clamp(best.fidelity, 0.0, 1.0);
  return best;
}

inline CatFit cat_fidelity(const Ket& k) { return cat_fidelity(density(k)); }

}  // namespace pairhop
