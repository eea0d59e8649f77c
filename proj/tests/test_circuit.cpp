#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pairhop/circuit.hpp"

using namespace pairhop;
using namespace pairhop::circuit;

namespace {

constexpr double kPi = std::numbers::pi;

// fourth-order central differences of f at x
template <class F>
std::array<double, 4> derivatives(F f, double x, double h = 1e-2) {
  const double fm2 = f(x - 2 * h), fm1 = f(x - h), f0 = f(x), fp1 = f(x + h), fp2 = f(x + 2 * h);
  const double fm3 = f(x - 3 * h), fp3 = f(x + 3 * h);
  return {(fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h), (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h),
          (fm3 - 8 * fm2 + 13 * fm1 - 13 * fp1 + 8 * fp2 - fp3) / (8 * h * h * h),
          (-fm3 + 12 * fm2 - 39 * fm1 + 56 * f0 - 39 * fp1 + 12 * fp2 - fp3) / (6 * h * h * h * h)};
}

}  // namespace

TEST(QubitExpand, HalfFluxQuantumClosedForm) {
  const QubitSpec q = reference_qubit();
  const QubitExpansion e = qubit_expand(q);
  EXPECT_NEAR(e.phi_min, 0.0, 1e-12);
  EXPECT_NEAR(e.E_J_min / q.E_J, 0.5 - 35.0 / 180.0, 1e-12);
  EXPECT_NEAR(e.E_J_min / 1e9, 55.0, 1e-9);
  EXPECT_NEAR(e.eps_J_min / q.E_J, 35.0 / 180.0 - 0.125, 1e-12);
  EXPECT_EQ(e.beta3, 0.0);
}

TEST(QubitExpand, KerrFreeAndAttractivePoints) {
  EXPECT_NEAR(qubit_expand({1.0, 0.125, 0.01, kPi}).eps_J_min, 0.0, 1e-12);
  EXPECT_LT(qubit_expand({1.0, 0.3, 0.01, 0.0}).eps_J_min, 0.0);
}

TEST(QubitExpand, GenericFluxMatchesFiniteDifferences) {
  const QubitSpec q{2.0, 0.3, 0.01, 2.1};
  const QubitExpansion e = qubit_expand(q);
  auto V = [&](double x) { return -q.E_J * (2 * std::cos(x / 2) + q.alpha * std::cos(x + q.phi0)); };
  const auto d = derivatives(V, e.phi_min);
  EXPECT_NEAR(d[0], 0.0, 1e-8);
  EXPECT_NEAR(d[1], e.E_J_min, 1e-6);
  EXPECT_NEAR(d[2], e.beta3 * q.E_J, 1e-4);
  EXPECT_NEAR(d[3], e.eps_J_min, 1e-3);
  EXPECT_NE(e.beta3, 0.0);
  // global, not merely local
  for (int i = 0; i < 400; ++i) EXPECT_GE(V(-2 * kPi + 4 * kPi * i / 400), V(e.phi_min) - 1e-12);
}

TEST(QubitExpand, DoubleWellIsRejected) {
  EXPECT_THROW(qubit_expand({1.0, 0.7, 0.01, kPi}), DegeneratePotentialError);
}

TEST(QubitExpand, KerrTunableInSign) {
  // for alpha in (1/8, 1/2) the quartic coefficient changes sign as the loop flux goes from 0 to pi
  for (double alpha : {0.2, 0.3, 0.45}) {
    int changes = 0;
    double prev = qubit_expand({1.0, alpha, 0.01, 0.0}).eps_J_min;
    for (int k = 1; k <= 50; ++k) {
      const double v = qubit_expand({1.0, alpha, 0.01, kPi * k / 50}).eps_J_min;
      if ((v > 0) != (prev > 0)) ++changes;
      prev = v;
    }
    EXPECT_EQ(changes, 1) << alpha;
  }
}

TEST(QubitSpec, TransmonicWarning) {
  EXPECT_FALSE(reference_qubit().transmonic_warning());
  EXPECT_TRUE((QubitSpec{1.0, 0.3, 0.1, kPi}).transmonic_warning());
}

TEST(SnailExpand, SymmetricFluxHasNoCubicTerm) {
  for (double a : {0.1, 0.29, 0.6}) EXPECT_EQ(snail_expand({1.0, a, 0.0, 3, std::nullopt}).c3, 0.0);
}

TEST(SnailExpand, MatchesFiniteDifferences) {
  const SnailSpec s = reference_snail();
  const SnailExpansion e = snail_expand(s);
  auto U = [&](double x) { return -s.alpha_c * std::cos(x) - s.n_large * std::cos((s.phi_c - x) / s.n_large); };
  const auto d = derivatives(U, e.phi_min);
  EXPECT_NEAR(d[0], 0.0, 1e-9);
  EXPECT_NEAR(d[1] / 2, e.c2, 1e-8);
  EXPECT_NEAR(d[2] / 6, e.c3, 1e-6);
  EXPECT_NEAR(d[3] / 24, e.c4, 1e-5);
  EXPECT_GT(e.c2, 0.0);
  EXPECT_NE(e.c3, 0.0);
}

TEST(SnailExpand, OverrideIsPassthrough) {
  SnailSpec s{25e9, 0.0, 0.0, 3, std::array<double, 2>{0.07, -0.03}};
  const SnailExpansion e = snail_expand(s);
  EXPECT_EQ(e.c2, 0.07);
  EXPECT_EQ(e.c3, -0.03);
  s.alpha_c = 0.29;
  EXPECT_THROW(snail_expand(s), ConfigError);
}

TEST(DeriveLattice, ZeroPointFluctuationAnchors) {
  const DerivedCouplings d = derive_lattice(reference_qubit(), reference_snail(), reference_resonator(), 45e6);
  EXPECT_NEAR(d.phi_zpf, 0.32, 0.005);
  EXPECT_NEAR(d.phi_zpf_aux, 0.070, 0.002);
  EXPECT_NEAR(d.E_J_eff / 1e9, 59.0, 0.5);
  EXPECT_NEAR(d.phi_zpf, std::pow(2 * 0.3 / (d.E_J_eff / 1e9), 0.25), 1e-15);
  EXPECT_NEAR(d.omega_aux, 2 * d.omega_c + 45e6, 1e-3);
}

TEST(DeriveLattice, EffectiveCouplingIdentities) {
  for (double D : {10e6, 45e6, -30e6, 200e6}) {
    const DerivedCouplings d = derive_lattice(reference_qubit(), reference_snail(), reference_resonator(), D);
    EXPECT_EQ(d.J, d.eta * d.eta / D);
    EXPECT_EQ(d.U_eff, d.U0 - 2.0 * d.eta * d.eta / D);
    EXPECT_EQ(d.J1, d.eta1 * d.eta1 / d.omega_c);
  }
  EXPECT_THROW(derive_lattice(reference_qubit(), reference_snail(), reference_resonator(), 0.0), std::invalid_argument);
}

TEST(DeriveLattice, PrintedFormulaArithmetic) {
  // choose c3 so that eta = 26 MHz exactly; then J(45 MHz) = 676/45 MHz and U_eff = U0 - 2 J
  const QubitSpec q = reference_qubit();
  const SnailExpansion se = snail_expand(reference_snail());
  const DerivedCouplings base = derive_lattice(q, reference_snail(), reference_resonator(), 45e6);
  const double c3 = -26e6 / (3.0 * 25e9 * base.phi_zpf * base.phi_zpf * base.phi_zpf_aux);
  const SnailSpec s{25e9, 0.0, 0.0, 3, std::array<double, 2>{se.c2, c3}};
  const DerivedCouplings d = derive_lattice(q, s, reference_resonator(), 45e6);
  EXPECT_NEAR(d.eta / 1e6, 26.0, 1e-9);
  EXPECT_NEAR(d.J / 1e6, 676.0 / 45.0, 1e-9);
  EXPECT_NEAR((d.U0 - d.U_eff) / 1e6, 2 * 676.0 / 45.0, 1e-9);
}

TEST(DeriveLattice, ThreeWaveScaleAndSingleHopping) {
  const DerivedCouplings d = derive_lattice(reference_qubit(), reference_snail(), reference_resonator(), 45e6);
  EXPECT_NEAR(std::abs(d.eta) / 26e6, 1.0, 0.5);
  EXPECT_GE(std::abs(d.eta), 15e6);
  EXPECT_LE(std::abs(d.eta), 35e6);
  EXPECT_NEAR(d.J1 / 675e3, 1.0, 0.01);
}

TEST(DeriveLattice, EnergyScaling) {
  const double lam = 10.0;
  QubitSpec q = reference_qubit();
  SnailSpec s = reference_snail();
  const DerivedCouplings a = derive_lattice(q, s, reference_resonator(), 45e6);
  q.E_J *= lam;
  q.E_c *= lam;
  s.E_Jc *= lam;
  const DerivedCouplings b = derive_lattice(q, s, reference_resonator(), lam * 45e6);
  EXPECT_NEAR(b.phi_zpf, a.phi_zpf, 1e-14);
  EXPECT_NEAR(b.phi_zpf_aux, a.phi_zpf_aux, 1e-14);
  for (auto [x, y] : {std::pair{a.omega_c, b.omega_c}, {a.eta, b.eta}, {a.eta1, b.eta1}, {a.U0, b.U0},
                      {a.U_eff, b.U_eff}, {a.J, b.J}, {a.J1, b.J1}, {a.E_J_eff, b.E_J_eff}})
    EXPECT_NEAR(y / (lam * x), 1.0, 1e-12);
}

TEST(DeriveLattice, SpecialPointFlagAndHoppingRatio) {
  const auto q = reference_qubit();
  const auto s = reference_snail();
  const auto r = reference_resonator();
  const double Dstar = special_detuning(derive_lattice(q, s, r, 45e6));
  const DerivedCouplings d = derive_lattice(q, s, r, Dstar);
  EXPECT_TRUE(d.near_special_point);
  EXPECT_NEAR(d.J, d.U_eff / 2, 1e-9 * d.U0);
  EXPECT_GT(d.J / d.J1, 20.0);
  EXPECT_FALSE(derive_lattice(q, s, r, 3 * Dstar).near_special_point);
}

TEST(DeltaSweep, PairHoppingDecreasesWithDetuning) {
  std::vector<double> deltas;
  for (int i = 1; i <= 30; ++i) deltas.push_back(5e6 * i);
  const auto rows = delta_sweep(reference_qubit(), reference_snail(), reference_resonator(), deltas);
  for (size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].J, rows[i - 1].J);
}

TEST(Resonator, ChargingDescriptionAndValidation) {
  ResonatorSpec r{10.0, 0.2e9, 100e9};
  const DerivedCouplings d = derive_lattice(reference_qubit(), reference_snail(), r, 45e6);
  const double ej = 100e9 + 2 * snail_expand(reference_snail()).c2 * 25e9;
  EXPECT_NEAR(d.phi_zpf_aux, std::pow(2 * 0.2e9 / ej, 0.25), 1e-15);
  EXPECT_THROW((ResonatorSpec{10.0, 0.2e9, std::nullopt}.validate()), ConfigError);
  EXPECT_THROW((ResonatorSpec{-1.0, std::nullopt, std::nullopt}.validate()), ConfigError);
}

TEST(FluxMismatch, ReferenceBounds) {
  EXPECT_EQ(kCrossKerrMax, 3.6e6);
  EXPECT_EQ(kAuxSelfKerrMax, 200e3);
  const DerivedCouplings d = derive_lattice(reference_qubit(), reference_snail(), reference_resonator(), 45e6);
  EXPECT_LT(kCrossKerrMax, std::abs(d.eta));
}
