#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pairhop/errors.hpp"

// Circuit-level parameters to lattice couplings. All energies are frequencies in Hz (the 2*pi is
// implicit everywhere); phases are in radians.
namespace pairhop::circuit {

inline constexpr double kResistanceQuantum = 6453.0;  // h / (2e)^2 in ohms

// Worst-case four-wave-mixing scales under flux mismatch, quoted as reference constants.
inline constexpr double kCrossKerrMax = 3.6e6;
inline constexpr double kAuxSelfKerrMax = 200e3;

struct QubitSpec {
  double E_J = 0.0;    // large junctions
  double alpha = 0.0;  // small / large junction ratio
  double E_c = 0.0;
  double phi0 = std::numbers::pi;

  bool transmonic_warning() const { return E_J / E_c < 20.0; }
};

struct QubitExpansion {
  double phi_min = 0.0;
  double E_J_min = 0.0;    // curvature at the minimum
  double eps_J_min = 0.0;  // quartic coefficient (phi^4 / 4!)
  double beta3 = 0.0;      // cubic coefficient in units of E_J (phi^3 / 3!)
};

struct SnailSpec {
  double E_Jc = 0.0;
  double alpha_c = 0.0;
  double phi_c = 0.0;
  int n_large = 3;
  std::optional<std::array<double, 2>> c23;  // direct (c2, c3) in place of the junction description

  void validate() const {
    if (!(E_Jc > 0.0)) throw ConfigError("snail: E_Jc must be > 0");
    if (c23 && (alpha_c != 0.0 || phi_c != 0.0))
      throw ConfigError("snail: give either the junction description (alpha_c, phi_c) or the (c2, c3) override, not both");
    if (!c23 && n_large < 1) throw ConfigError("snail: n_large must be >= 1");
  }
};

struct SnailExpansion {
  double phi_min = 0.0;
  double c2 = 0.0, c3 = 0.0, c4 = 0.0;
};

struct ResonatorSpec {
  double Z = 10.0;  // ohms
  std::optional<double> E_c_aux, E_J_aux;

  void validate() const {
    if (!(Z > 0.0)) throw ConfigError("resonator: Z must be > 0");
    if (E_c_aux.has_value() != E_J_aux.has_value())
      throw ConfigError("resonator: E_c_aux and E_J_aux must be given together");
  }
};

struct DerivedCouplings {
  double Delta = 0.0;
  int z = 1;
  double omega_c = 0.0, omega_aux = 0.0;
  double phi_zpf = 0.0, phi_zpf_aux = 0.0;
  double E_J_eff = 0.0, eps_J_min = 0.0;
  double eta = 0.0, eta1 = 0.0;
  double U0 = 0.0, U_eff = 0.0;
  double J = 0.0, J1 = 0.0;
  bool near_special_point = false;  // |J - U_eff/2| < 2% of |U_eff|
};

namespace detail {

// Locate the global minimum of a smooth periodic function on [lo, lo + period) by a dense scan
// followed by Newton on the derivative.
template <class F, class D1, class D2>
double periodic_minimum(F&& f, D1&& d1, D2&& d2, double lo, double period, const char* what) {
  const int n = 8192;
  int best = 0;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = f(lo + period * i / n);
    if (v[i] < v[best]) best = i;
  }
  double x = lo + period * best / n;
  auto newton = [&](double y) {
    for (int it = 0; it < 100; ++it) {
      const double h2 = d2(y);
      if (!(h2 > 0.0)) break;
      const double dy = -d1(y) / h2;
      y += dy;
      if (std::abs(dy) < 1e-14) break;
    }
    return y;
  };
  x = newton(x);
  if (std::abs(d1(x)) > 1e-12 || !(d2(x) > 1e-9))
    throw DegeneratePotentialError(std::string(what) + ": no nondegenerate minimum (flat or double-well potential)");
  // a second minimum of the same depth elsewhere in the period means a symmetric double well
  const double fx = f(x), tol = 1e-9 * std::max(1.0, std::abs(fx));
  for (int i = 0; i < n; ++i) {
    const int prev = (i + n - 1) % n, next = (i + 1) % n;
    if (!(v[i] <= v[prev] && v[i] <= v[next]) || v[i] - fx > 1e-3 * std::max(1.0, std::abs(fx))) continue;
    const double y = newton(lo + period * i / n);
    if (std::abs(std::remainder(y - x, period)) > 1e-6 && f(y) - fx < tol)
      throw DegeneratePotentialError(std::string(what) + ": degenerate minima (double-well potential)");
  }
  return x;
}

}  // namespace detail

// V(phi) / E_J = -[2 cos(phi/2) + alpha cos(phi + phi0)]
inline QubitExpansion qubit_expand(const QubitSpec& q) {
  if (!(q.E_J > 0.0) || !(q.E_c > 0.0)) throw ConfigError("qubit: E_J and E_c must be > 0");
  const double a = q.alpha, p0 = q.phi0;
  auto V = [&](double x) { return -(2.0 * std::cos(x / 2) + a * std::cos(x + p0)); };
  auto V1 = [&](double x) { return std::sin(x / 2) + a * std::sin(x + p0); };
  auto V2 = [&](double x) { return 0.5 * std::cos(x / 2) + a * std::cos(x + p0); };
  const double x = detail::periodic_minimum(V, V1, V2, -2.0 * std::numbers::pi, 4.0 * std::numbers::pi, "qubit");
  QubitExpansion e;
  e.phi_min = x;
  e.E_J_min = q.E_J * V2(x);
  e.beta3 = -(0.25 * std::sin(x / 2) + a * std::sin(x + p0));
  e.eps_J_min = -q.E_J * (0.125 * std::cos(x / 2) + a * std::cos(x + p0));
  if (std::abs(e.beta3) < 1e-14) e.beta3 = 0.0;
  return e;
}

// U(phi) / E_Jc = -alpha_c cos(phi) - n cos((phi_c - phi) / n); c_k are Taylor coefficients at the minimum.
inline SnailExpansion snail_expand(const SnailSpec& s) {
  s.validate();
  SnailExpansion e;
  if (s.c23) {
    e.c2 = (*s.c23)[0];
    e.c3 = (*s.c23)[1];
    return e;
  }
  const double a = s.alpha_c, pc = s.phi_c;
  const double n = s.n_large;
  auto U = [&](double x) { return -a * std::cos(x) - n * std::cos((pc - x) / n); };
  auto U1 = [&](double x) { return a * std::sin(x) - std::sin((pc - x) / n); };
  auto U2 = [&](double x) { return a * std::cos(x) + std::cos((pc - x) / n) / n; };
  const double x = detail::periodic_minimum(U, U1, U2, -n * std::numbers::pi, 2.0 * n * std::numbers::pi, "snail");
  const double u = (pc - x) / n;
  e.phi_min = x;
  e.c2 = U2(x) / 2.0;
  e.c3 = (-a * std::sin(x) + std::sin(u) / (n * n)) / 6.0;
  e.c4 = (-a * std::cos(x) - std::cos(u) / (n * n * n)) / 24.0;
  if (std::abs(e.c3) < 1e-15) e.c3 = 0.0;
  return e;
}

inline DerivedCouplings derive_lattice(const QubitSpec& q, const SnailSpec& s, const ResonatorSpec& r, double Delta,
                                       int z = 1) {
  if (Delta == 0.0 || !std::isfinite(Delta)) throw std::invalid_argument("derive_lattice: Delta must be nonzero");
  if (z < 1) throw std::invalid_argument("derive_lattice: z must be >= 1");
  r.validate();
  const QubitExpansion qe = qubit_expand(q);
  const SnailExpansion se = snail_expand(s);
  DerivedCouplings d;
  d.Delta = Delta;
  d.z = z;
  d.E_J_eff = qe.E_J_min + 2.0 * se.c2 * s.E_Jc;
  if (!(d.E_J_eff > 0.0)) throw DegeneratePotentialError("derive_lattice: effective qubit inductance is not positive");
  d.eps_J_min = qe.eps_J_min;
  d.phi_zpf = std::pow(2.0 * q.E_c / d.E_J_eff, 0.25);
  if (r.E_c_aux) {
    const double ej = *r.E_J_aux + 2.0 * se.c2 * s.E_Jc;
    d.phi_zpf_aux = std::pow(2.0 * *r.E_c_aux / ej, 0.25);
  } else {
    d.phi_zpf_aux = std::sqrt(std::numbers::pi * r.Z / kResistanceQuantum);
  }
  d.U0 = d.eps_J_min / d.E_J_eff * q.E_c;
  d.omega_c = std::sqrt(8.0 * q.E_c * d.E_J_eff) + d.U0;
  d.omega_aux = 2.0 * d.omega_c + Delta;
  const double sz = std::sqrt(double(z));
  d.eta = -3.0 * sz * se.c3 * s.E_Jc * d.phi_zpf * d.phi_zpf * d.phi_zpf_aux;
  d.eta1 = -2.0 * sz * se.c2 * s.E_Jc * d.phi_zpf * d.phi_zpf_aux;
  d.J = d.eta * d.eta / Delta;
  d.U_eff = d.U0 - 2.0 * d.eta * d.eta / Delta;
  d.J1 = d.eta1 * d.eta1 / d.omega_c;
  d.near_special_point = d.U_eff != 0.0 && std::abs(d.J - d.U_eff / 2.0) < 0.02 * std::abs(d.U_eff);
  return d;
}

inline std::vector<DerivedCouplings> delta_sweep(const QubitSpec& q, const SnailSpec& s, const ResonatorSpec& r,
                                                 const std::vector<double>& deltas, int z = 1) {
  std::vector<DerivedCouplings> out;
  out.reserve(deltas.size());
  for (double D : deltas) out.push_back(derive_lattice(q, s, r, D, z));
  return out;
}

// Detuning at which J = U_eff / 2, i.e. eta^2 / Delta = U0 / 4.
inline double special_detuning(const DerivedCouplings& d) {
  if (!(d.U0 > 0.0)) throw std::domain_error("special_detuning: needs a repulsive bare Kerr (U0 > 0)");
  return 4.0 * d.eta * d.eta / d.U0;
}

// Circuit values used throughout the examples (Hz).
inline QubitSpec reference_qubit() { return {180e9, 35.0 / 180.0, 0.3e9, std::numbers::pi}; }
inline SnailSpec reference_snail() { return {25e9, 7.25 / 25.0, 0.92 * std::numbers::pi, 3, std::nullopt}; }
inline ResonatorSpec reference_resonator() { return {10.0, std::nullopt, std::nullopt}; }

}  // namespace pairhop::circuit
