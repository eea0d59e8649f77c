#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pairhop/detail/rk45.hpp"
#include "pairhop/errors.hpp"

namespace pairhop {

// Energies and rates share one unit. Frequencies are absolute; omega_at only shifts the
// reported omega_psf, all dynamics below depend on omega' = omega - omega_at.
struct SemiParams {
  double delta = 0.0;  // omega_at/2 - omega_c
  double U = 1.0;
  double J = 0.0;
  double Gamma_l = 0.0;
  double Gamma_p = 1.0;
  double Gamma_em0 = 0.0;
  double omega_at = 0.0;
  bool keep_plus_one = false;
  bool keep_lamb_shift = false;

  double omega_c() const { return omega_at / 2.0 - delta; }
  double Omega_R() const { return 0.5 * std::sqrt(Gamma_em0 * Gamma_p); }

  void validate() const {
    if (Gamma_l < 0.0 || Gamma_p <= 0.0 || Gamma_em0 < 0.0)
      throw std::invalid_argument("SemiParams: rates must be >= 0 and Gamma_p > 0");
    if (!std::isfinite(delta) || !std::isfinite(U) || !std::isfinite(J))
      throw std::invalid_argument("SemiParams: non-finite parameter");
  }
};

inline double eq_estimate(double mu, double U, double J) {
  if (J >= U / 2.0) throw InstabilityError("eq_estimate: J >= U/2");
  if (mu < 0.0) throw std::invalid_argument("eq_estimate: mu must be >= 0");
  return mu / (U - 2.0 * J);
}

struct BogoliubovMode {
  double E = 0.0;
  double xi = 0.0;
};

// xi_k = -(4J/z) sum_nu [cos(k_nu a) - 1], E_k = sqrt(xi (xi + 2 mu)).
inline BogoliubovMode bogoliubov(const std::vector<double>& k, double mu, double J, int z, double a = 1.0) {
  if (!(mu > 0.0) || !(J > 0.0)) throw std::invalid_argument("bogoliubov: mu and J must be > 0");
  if (z < 1 || k.empty()) throw std::invalid_argument("bogoliubov: need z >= 1 and a non-empty k");
  double xi = 0.0;
  for (double kn : k) xi -= (4.0 * J / z) * (std::cos(kn * a) - 1.0);
  return {std::sqrt(xi * (xi + 2.0 * mu)), xi};
}

// S(omega') for omega' = omega - omega_at.
inline double pump_spectrum(const SemiParams& p, double w) {
  const double g = p.Gamma_p / 2.0;
  return p.Gamma_em0 * g * g / (w * w + g * g);
}

enum class Branch { Upper, Lower, Trivial };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::Upper: return "upper";
    case Branch::Lower: return "lower";
    case Branch::Trivial: return "trivial";
  }
  return "?";
}

struct FixedPoint {
  std::complex<double> psi0{0.0, 0.0};
  double omega_psf = 0.0;  // lab frame
  double omega_rel = 0.0;  // omega_psf - omega_at
  double s = 0.0;
  bool stable = false;
  bool divergent = false;  // U/2 - J (- Lamb shift) = 0: psi0 is unbounded
  Branch branch = Branch::Trivial;
  Eigen::VectorXcd spectrum;  // linearization eigenvalues with the phase mode removed
};

struct PsiMaxJc {
  double psi_max = 0.0;
  double J_c = 0.0;
};

inline PsiMaxJc psi_max_jc(const SemiParams& p, double delta) {
  p.validate();
  if (!(p.Gamma_em0 > p.Gamma_l) || !(p.Gamma_l > 0.0))
    throw BelowThresholdError("psi_max_jc: requires Gamma_em0 > Gamma_l > 0");
  const double pm = std::sqrt((p.Gamma_p / p.Gamma_l - p.Gamma_p / p.Gamma_em0) / 2.0);
  return {pm, p.U / 2.0 - delta / (2.0 * pm)};
}

// ---- Maxwell-Bloch ---------------------------------------------------------------------------
// Variables in the frame rotating at omega_at: pair field psi, emitter coherence Sigma, inversion X.

struct MbState {
  std::complex<double> psi{0.0, 0.0};
  std::complex<double> Sigma{0.0, 0.0};
  double X = 0.0;
};

struct MbTrajectory {
  std::vector<double> t;
  std::vector<MbState> states;
};

namespace detail {

inline double mb_c(const SemiParams& p, double abs_psi) { return 4.0 * abs_psi + (p.keep_plus_one ? 1.0 : 0.0); }

inline MbState mb_rhs(const SemiParams& p, const MbState& s) {
  using namespace std::complex_literals;
  const double Om = p.Omega_R();
  const double c = mb_c(p, std::abs(s.psi));
  MbState d;
  d.psi = -1i * (-2.0 * p.delta + c * (p.U / 2.0 - p.J)) * s.psi + c * (-1i * Om * s.Sigma - p.Gamma_l / 2.0 * s.psi);
  d.X = (-p.Gamma_p * s.X - 2i * Om * (s.psi * std::conj(s.Sigma) - std::conj(s.psi) * s.Sigma) + p.Gamma_p).real();
  d.Sigma = -p.Gamma_p / 2.0 * s.Sigma + 1i * Om * s.psi * s.X;
  return d;
}

inline Eigen::VectorXd mb_pack(const MbState& s) {
  Eigen::VectorXd v(5);
  v << s.psi.real(), s.psi.imag(), s.Sigma.real(), s.Sigma.imag(), s.X;
  return v;
}

inline MbState mb_unpack(const Eigen::VectorXd& v) { return {{v[0], v[1]}, {v[2], v[3]}, v[4]}; }

// Flow in the frame co-rotating with the limit cycle at omega' (fixed points become stationary).
inline Eigen::VectorXd mb_rotating_rhs(const SemiParams& p, double w, const Eigen::VectorXd& v) {
  using namespace std::complex_literals;
  const MbState s = mb_unpack(v);
  MbState d = mb_rhs(p, s);
  d.psi += 1i * w * s.psi;
  d.Sigma += 1i * w * s.Sigma;
  return mb_pack(d);
}

// Steady coherence and inversion slaved to a field psi0 e^{-i w t}.
inline MbState mb_slaved(const SemiParams& p, std::complex<double> psi0, double w) {
  using namespace std::complex_literals;
  const double S = pump_spectrum(p, w);
  const double X = 1.0 / (1.0 + 2.0 * std::norm(psi0) * S / p.Gamma_p);
  const std::complex<double> Sigma = 1i * p.Omega_R() * psi0 * X / (p.Gamma_p / 2.0 - 1i * w);
  return {psi0, Sigma, X};
}

}  // namespace detail

struct StabilityReport {
  Eigen::VectorXcd eigenvalues;  // phase (Goldstone) mode removed
  bool stable = false;
};

// Central-difference Jacobian of the co-rotating flow; the eigenvalue closest to zero belongs to the
// global phase rotation and is excluded from the verdict.
inline StabilityReport mb_stability(const SemiParams& p, const MbState& fixed, double omega_rel, double step = 1e-6) {
  const Eigen::VectorXd x0 = detail::mb_pack(fixed);
  Eigen::MatrixXd Jm(5, 5);
  for (int j = 0; j < 5; ++j) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp[j] += step;
    xm[j] -= step;
    Jm.col(j) = (detail::mb_rotating_rhs(p, omega_rel, xp) - detail::mb_rotating_rhs(p, omega_rel, xm)) / (2.0 * step);
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(Jm, false);
  Eigen::VectorXcd ev = es.eigenvalues();
  Eigen::Index zero = 0;
  ev.cwiseAbs().minCoeff(&zero);
  StabilityReport r;
  r.eigenvalues.resize(4);
  for (Eigen::Index i = 0, k = 0; i < 5; ++i)
    if (i != zero) r.eigenvalues[k++] = ev[i];
  r.stable = (r.eigenvalues.real().array() < 1e-9).all();
  return r;
}

inline MbTrajectory maxwell_bloch(const SemiParams& p, const MbState& init, double t_final, int n_samples = 1001,
                                  const detail::Rk45Options& opt = {}) {
  p.validate();
  if (!(t_final > 0.0) || n_samples < 2) throw std::invalid_argument("maxwell_bloch: need t_final > 0, >= 2 samples");
  auto to_vec = [](const MbState& s) {
    Eigen::VectorXcd y(3);
    y << s.psi, s.Sigma, s.X;
    return y;
  };
  auto from_vec = [](const Eigen::VectorXcd& y) { return MbState{y[0], y[1], y[2].real()}; };
  std::vector<double> samples(n_samples);
  for (int i = 0; i < n_samples; ++i) samples[i] = t_final * i / (n_samples - 1);
  MbTrajectory tr;
  detail::rk45_integrate(
      [&](double, const Eigen::VectorXcd& y) { return to_vec(detail::mb_rhs(p, from_vec(y))); }, to_vec(init), 0.0,
      samples,
      [&](double t, const Eigen::VectorXcd& y) {
        tr.t.push_back(t);
        tr.states.push_back(from_vec(y));
      },
      [](Eigen::VectorXcd& y) { y[2] = y[2].real(); }, opt);
  return tr;
}

// ---- fixed points --------------------------------------------------------------------------------

namespace detail {

// X0 Im g: frequency pull from the emitter polarization at the saturated inversion X0.
inline double lamb_shift(const SemiParams& p, double w, double X0) {
  if (!p.keep_lamb_shift) return 0.0;
  const double Om2 = p.Omega_R() * p.Omega_R();
  const double g = p.Gamma_p / 2.0;
  return X0 * Om2 * w / (g * g + w * w);
}

// psi0 implied by the frequency relation  w + 2 delta = c(psi0) (U/2 - J - L).
inline double psi_from_frequency(const SemiParams& p, double w, double X0, bool& divergent) {
  const double stiff = p.U / 2.0 - p.J - lamb_shift(p, w, X0);
  divergent = stiff == 0.0;
  if (divergent) return std::numeric_limits<double>::infinity();
  return ((w + 2.0 * p.delta) / stiff - (p.keep_plus_one ? 1.0 : 0.0)) / 4.0;
}

// Saturated amplitude on the gain balance Gamma_l (1 + s) = S(w), valid where S(w) > Gamma_l.
inline double psi_from_gain(const SemiParams& p, double w) {
  const double S = pump_spectrum(p, w);
  return std::sqrt(std::max(0.0, (S / p.Gamma_l - 1.0) * p.Gamma_p / (2.0 * S)));
}

inline double saturating_residual(const SemiParams& p, double w) {
  const double psi = psi_from_gain(p, w);
  const double X0 = p.Gamma_l / pump_spectrum(p, w);
  const double c = mb_c(p, psi);
  return w + 2.0 * p.delta - c * (p.U / 2.0 - p.J - lamb_shift(p, w, X0));
}

// Inverse of the gain balance on one side of the Lorentzian: S(w) = Gamma_l / (1 - 2 psi^2 Gamma_l / Gamma_p).
inline double frequency_from_gain(const SemiParams& p, double psi, int side) {
  const double S = p.Gamma_l / (1.0 - 2.0 * psi * psi * p.Gamma_l / p.Gamma_p);
  return side * (p.Gamma_p / 2.0) * std::sqrt(std::max(0.0, p.Gamma_em0 / S - 1.0));
}

inline double residual_at(const SemiParams& p, double psi, double w) {
  const double X0 = 1.0 - 2.0 * psi * psi * p.Gamma_l / p.Gamma_p;
  return w + 2.0 * p.delta - mb_c(p, psi) * (p.U / 2.0 - p.J - lamb_shift(p, w, X0));
}

inline double branch_residual(const SemiParams& p, double psi, int side) {
  return residual_at(p, psi, frequency_from_gain(p, psi, side));
}

inline double polish_root(const SemiParams& p, int side, double a, double b) {
  double fa = branch_residual(p, a, side);
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, a); ++it) {
    const double m = 0.5 * (a + b), fm = branch_residual(p, m, side);
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  double x = 0.5 * (a + b);
  // Newton polish, kept only while it improves the residual
  for (int it = 0; it < 8; ++it) {
    const double f = branch_residual(p, x, side);
    const double h = 1e-7 * std::max(1.0, x);
    const double df = (branch_residual(p, x + h, side) - branch_residual(p, x - h, side)) / (2.0 * h);
    if (df == 0.0 || f == 0.0) break;
    const double xn = x - f / df;
    if (!(std::abs(branch_residual(p, xn, side)) < std::abs(f))) break;
    const bool done = std::abs(xn - x) < 1e-13 * std::max(1.0, x);
    x = xn;
    if (done) break;
  }
  return x;
}

inline void assign_stability(const SemiParams& p, FixedPoint& fp) {
  if (fp.divergent) return;
  // Stationarity in the Maxwell-Bloch flow requires the Lamb shift; re-solve with it when the
  // caller dropped it and linearize there. The shift is O(Gamma_l/Gamma_p) so the branch is the same.
  SemiParams q = p;
  double w = fp.omega_rel;
  if (!p.keep_lamb_shift) {
    q.keep_lamb_shift = true;
    const double h = 1e-6 * std::max(1.0, std::abs(w));
    for (int it = 0; it < 50; ++it) {
      const double f = saturating_residual(q, w);
      const double df = (saturating_residual(q, w + h) - saturating_residual(q, w - h)) / (2.0 * h);
      if (df == 0.0) break;
      const double step = f / df;
      w -= step;
      if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(w))) break;
    }
    if (!std::isfinite(w) || pump_spectrum(q, w) <= q.Gamma_l) w = fp.omega_rel;
  }
  const MbState fixed = mb_slaved(q, psi_from_gain(q, w), w);
  StabilityReport r = mb_stability(q, fixed, w);
  fp.stable = r.stable;
  fp.spectrum = r.eigenvalues;
}

}  // namespace detail

// All fixed points: the trivial one plus every real nontrivial root of the frequency/gain relations.
inline std::vector<FixedPoint> fixed_point(const SemiParams& p, bool saturating, bool assess_stability = true) {
  p.validate();
  std::vector<FixedPoint> out;
  FixedPoint trivial;
  trivial.omega_psf = p.omega_at;
  trivial.stable = p.Gamma_em0 <= p.Gamma_l;
  out.push_back(trivial);
  if (!(p.Gamma_em0 > p.Gamma_l) || !(p.Gamma_l > 0.0)) return out;

  std::vector<FixedPoint> nontrivial;
  const double w_th = (p.Gamma_p / 2.0) * std::sqrt(p.Gamma_em0 / p.Gamma_l - 1.0);
  if (!saturating) {
    for (double w : {-w_th, w_th}) {
      FixedPoint fp;
      bool div = false;
      const double psi = detail::psi_from_frequency(p, w, 1.0, div);
      if (!(psi > 0.0)) continue;
      fp.psi0 = psi;
      fp.divergent = div;
      fp.omega_rel = w;
      fp.omega_psf = p.omega_at + w;
      fp.s = div ? std::numeric_limits<double>::infinity() : 2.0 * psi * psi * pump_spectrum(p, w) / p.Gamma_p;
      nontrivial.push_back(fp);
    }
  } else {
    // Each side of the Lorentzian is parametrized by psi in (0, psi_max): the gain balance fixes w(psi)
    // in closed form, which resolves roots hugging the threshold edge where w varies fastest.
    const double pm = psi_max_jc(p, 0.0).psi_max;
    const int scan = 4000;
    std::vector<double> nodes;
    for (int k = 1; k < 200; ++k) nodes.push_back(pm * std::pow(1e-8, 1.0 - k / 200.0) / scan);
    for (int k = 1; k < scan; ++k) nodes.push_back(pm * k / scan);
    nodes.push_back(pm);
    std::vector<std::pair<double, double>> found;
    for (int side : {-1, 1}) {
      double x0 = nodes[0], f0 = detail::branch_residual(p, x0, side);
      for (size_t k = 1; k < nodes.size(); ++k) {
        const double x1 = nodes[k];
        // at psi_max the frequency is exactly zero; rounding in w(psi) would otherwise hide a root there
        const double f1 = k + 1 == nodes.size() ? detail::residual_at(p, x1, 0.0) : detail::branch_residual(p, x1, side);
        if ((f0 < 0.0) != (f1 < 0.0) || f1 == 0.0) {
          const double psi = f1 == 0.0 ? x1 : detail::polish_root(p, side, x0, x1);
          const double w = detail::frequency_from_gain(p, psi, side);
          // the two sides meet at psi_max (w = 0); do not report that root twice
          bool dup = false;
          for (auto [u, v] : found)
            dup = dup || (std::abs(v - w) < 1e-9 * std::max(1.0, std::abs(w))) || std::abs(u - psi) < 1e-9 * pm;
          if (!dup && psi > 0.0) {
            found.emplace_back(psi, w);
            FixedPoint fp;
            fp.psi0 = psi;
            fp.omega_rel = w;
            fp.omega_psf = p.omega_at + w;
            fp.s = 2.0 * psi * psi * pump_spectrum(p, w) / p.Gamma_p;
            nontrivial.push_back(fp);
          }
        }
        x0 = x1;
        f0 = f1;
      }
    }
  }
  std::sort(nontrivial.begin(), nontrivial.end(),
            [](const FixedPoint& a, const FixedPoint& b) { return std::abs(a.psi0) > std::abs(b.psi0); });
  for (size_t i = 0; i < nontrivial.size(); ++i) {
    nontrivial[i].branch = i == 0 ? Branch::Upper : Branch::Lower;
    if (assess_stability) detail::assign_stability(p, nontrivial[i]);
    out.push_back(nontrivial[i]);
  }
  return out;
}

// Largest stable nontrivial fixed point, or the trivial one.
inline FixedPoint stable_branch(const std::vector<FixedPoint>& fps) {
  FixedPoint best = fps.front();
  for (const FixedPoint& f : fps)
    if (f.branch != Branch::Trivial && f.stable && std::abs(f.psi0) > std::abs(best.psi0)) best = f;
  return best;
}

}  // namespace pairhop
