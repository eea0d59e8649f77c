#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pairhop/gutzwiller.hpp"

using namespace pairhop;

namespace {

Ket fock_ket(int n_max, int n) {
  CVector c = CVector::Zero(n_max + 1);
  c[n] = 1.0;
  return {c, false};
}

// Variational energy as a function of a real pair field: lowest eigenvalue of the even-sector
// mean-field Hamiltonian plus J psi^2. Its minimum over psi equals the Gutzwiller minimum.
double legendre_energy(double mu, double J, int n_max, double psi) {
  const int d = n_max / 2 + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const double n = 2.0 * i;
    h(i, i) = -mu * n + 0.5 * n * (n - 1.0);
    if (i + 1 < d) h(i, i + 1) = h(i + 1, i) = -J * psi * std::sqrt((n + 2.0) * (n + 1.0));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0] + J * psi * psi;
}

}  // namespace

TEST(GwEnergy, FockStates) {
  EqParams p{1.2, 1.0, 0.3, 0.0, ParitySector::Full};
  EXPECT_EQ(gw_energy(fock_ket(10, 0), p), 0.0);
  EXPECT_NEAR(gw_energy(fock_ket(10, 2), p), -1.4, 1e-14);
}

TEST(GwEnergy, CoherentStateNormalOrdering) {
  EqParams p{0.9, 1.0, 0.31, 0.07, ParitySector::Full};
  const cplx alpha(1.4, -0.6);
  const double r2 = std::norm(alpha);
  Ket k = coherent_state(FockSpace(80), alpha);
  const double oracle = -p.mu * r2 + (p.U / 2 - p.J) * r2 * r2 - p.J1 * r2;
  EXPECT_NEAR(gw_energy(k, p), oracle, 1e-10);
}

TEST(GwEnergy, LargeAmplitudeLandscape) {
  // For |alpha| >> 1 the normal-ordered energy approaches -mu|a|^2 + (U/2 - J)|a|^4.
  EqParams p{1.2, 1.0, 0.4, 0.0, ParitySector::Full};
  const double r = 4.0;
  const double landscape = -p.mu * r * r + (p.U / 2 - p.J) * std::pow(r, 4);
  EXPECT_NEAR(gw_energy(coherent_state(FockSpace(120), r), p) / landscape, 1.0, 1e-12);
}

TEST(GwSolve, MottAtSmallJ) {
  GwSolution s = gw_solve({1.2, 1.0, 0.05, 0.0, ParitySector::Even});
  EXPECT_EQ(s.phase, Phase::Mott);
  EXPECT_NEAR(s.density, 2.0, 1e-10);
  EXPECT_LT(std::abs(s.psi2), 1e-10);
  EXPECT_TRUE(s.converged);
}

TEST(GwSolve, PairSuperfluidDensityEstimate) {
  GwSolution s = gw_solve({1.2, 1.0, 0.45, 0.0, ParitySector::Even});
  EXPECT_EQ(s.phase, Phase::PSF);
  EXPECT_NEAR(std::abs(s.psi2) / 12.0, 1.0, 0.1);
  EXPECT_LT(std::abs(s.psi1), 1e-8);
  EXPECT_NEAR(s.psi2.imag(), 0.0, 1e-12);
  EXPECT_GT(s.psi2.real(), 0.0);
  EXPECT_TRUE(s.converged);
}

TEST(GwSolve, InstabilityAtJStar) {
  EXPECT_THROW(gw_solve({1.2, 1.0, 0.5, 0.0, ParitySector::Even}), InstabilityError);
  EXPECT_THROW(gw_solve({1.2, 1.0, 0.6, 0.0, ParitySector::Even}), InstabilityError);
}

TEST(GwSolve, RejectsSingleHoppingInParitySector) {
  EXPECT_THROW(gw_solve({1.2, 1.0, 0.3, 0.05, ParitySector::Even}), std::invalid_argument);
}

TEST(GwSolve, MatchesLegendreScan) {
  const double mu = 1.2, J = 0.3;
  GwOptions opt;
  opt.n_max = 40;
  opt.fidelity = false;
  GwSolution s = gw_solve({mu, 1.0, J, 0.0, ParitySector::Even}, opt);
  double best = 1e300, best_psi = 0;
  for (int i = 0; i <= 4000; ++i) {
    const double psi = 8.0 * i / 4000;
    const double e = legendre_energy(mu, J, 40, psi);
    if (e < best) best = e, best_psi = psi;
  }
  // refine with golden section around the scan minimum
  double a = best_psi - 0.004, b = best_psi + 0.004;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 100; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (legendre_energy(mu, J, 40, c) < legendre_energy(mu, J, 40, d)) b = d; else a = c;
  }
  EXPECT_NEAR(s.energy, legendre_energy(mu, J, 40, 0.5 * (a + b)), 1e-9);
  EXPECT_NEAR(std::abs(s.psi2), 0.5 * (a + b), 1e-5);
}

TEST(GwSolve, SelfConsistentEigenstate) {
  for (EqParams p : {EqParams{1.2, 1.0, 0.42, 0.0, ParitySector::Even},
                     EqParams{1.5, 1.0, 0.2, 0.065, ParitySector::Full},
                     EqParams{0.7, 1.0, 0.3, 0.0, ParitySector::Odd}}) {
    GwOptions opt;
    opt.fidelity = false;
    GwSolution s = gw_solve(p, opt);
    ASSERT_TRUE(s.converged);
    CMatrix h = mean_field_hamiltonian(p, s.n_max, s.psi1, s.psi2);
    const CVector& c = s.site_state.amplitudes;
    const cplx e = c.dot(h * c);
    EXPECT_LT((h * c - e * c).norm(), 1e-8);
    EXPECT_NEAR(std::abs(expect_a2(c) - s.psi2), 0.0, 1e-10);
    EXPECT_NEAR(std::abs(expect_a(c) - s.psi1), 0.0, 1e-10);
  }
}

TEST(GwSolve, LocalMinimum) {
  EqParams p{1.2, 1.0, 0.4, 0.0, ParitySector::Even};
  GwOptions opt;
  opt.fidelity = false;
  GwSolution s = gw_solve(p, opt);
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    CVector c = s.site_state.amplitudes;
    for (Eigen::Index n = 0; n < c.size(); n += 2) c[n] += 1e-4 * cplx(nd(rng), nd(rng));
    c.normalize();
    EXPECT_GE(gw_energy(Ket{c, false}, p), s.energy - 1e-12);
  }
}

TEST(GwSolve, GlobalPhaseCovariance) {
  EqParams p{1.2, 1.0, 0.44, 0.0, ParitySector::Even};
  GwOptions opt;
  opt.fidelity = false;
  GwSolution s = gw_solve(p, opt);
  CVector c = s.site_state.amplitudes;
  for (Eigen::Index n = 0; n < c.size(); ++n) c[n] *= std::polar(1.0, 0.83 * n);
  EXPECT_NEAR(gw_energy(Ket{c, false}, p), s.energy, 1e-12);
}

TEST(GwSolve, EvenSectorHasNoOddAmplitudes) {
  GwSolution s = gw_solve({1.2, 1.0, 0.46, 0.0, ParitySector::Even});
  for (Eigen::Index n = 1; n < s.site_state.amplitudes.size(); n += 2)
    EXPECT_EQ(s.site_state.amplitudes[n], cplx(0.0, 0.0));
}

TEST(GwSolve, PairFieldMonotoneNearThreshold) {
  GwOptions opt;
  opt.fidelity = false;
  double prev = -1.0;
  for (double J = 0.40; J <= 0.4901; J += 0.01) {
    const double v = std::abs(gw_solve({1.2, 1.0, J, 0.0, ParitySector::Even}, opt).psi2);
    EXPECT_GT(v, prev) << J;
    prev = v;
  }
}

TEST(GwSolve, CatFidelityNearJStar) {
  GwSolution s = gw_solve({1.2, 1.0, 0.48, 0.0, ParitySector::Even});
  EXPECT_GT(s.f_cat.fidelity, 0.95);
  EXPECT_EQ(s.f_cat.parity, 1);
}

TEST(Classify, Labels) {
  EXPECT_EQ(classify(0.0, 0.0), Phase::Mott);
  EXPECT_EQ(classify(0.0, 12.0), Phase::PSF);
  EXPECT_EQ(classify(0.3, 1.0), Phase::SF);
  EXPECT_EQ(classify(5e-5, 5e-5), Phase::Mott);
}

TEST(Classify, SingleHoppingBreaksZ2) {
  GwOptions opt;
  opt.fidelity = false;
  GwSolution s = gw_solve({1.5, 1.0, 0.2, 0.065, ParitySector::Full}, opt);
  EXPECT_EQ(s.phase, Phase::SF);
  EXPECT_GT(s.psi1.real(), 0.0);
  EXPECT_NEAR(s.psi1.imag(), 0.0, 1e-12);
}

TEST(Classify, PairPhaseSurvivesWeakSingleHopping) {
  GwOptions opt;
  opt.fidelity = false;
  GwSolution s = gw_solve({1.5, 1.0, 0.2, 0.002, ParitySector::Full}, opt);
  EXPECT_EQ(s.phase, Phase::PSF);
  EXPECT_LT(std::abs(s.psi1), 1e-8);
}

TEST(GwSweep, MottLobesFullSector) {
  GwOptions opt;
  opt.fidelity = false;
  std::vector<EqParams> pts;
  for (double mu : {-0.3, 0.5, 1.5, 2.5}) pts.push_back({mu, 1.0, 0.01, 0.0, ParitySector::Full});
  auto rows = gw_sweep(pts, opt, 2);
  const double expect[] = {0, 1, 2, 3};
  for (size_t i = 0; i < rows.size(); ++i) {
    ASSERT_TRUE(rows[i].solution);
    EXPECT_EQ(rows[i].solution->phase, Phase::Mott);
    EXPECT_NEAR(rows[i].solution->density, expect[i], 1e-10);
  }
}

TEST(GwSweep, WorkerCountDoesNotChangeResults) {
  GwOptions opt;
  opt.fidelity = false;
  auto pts = mu_j_grid({0.0, 1.0, 0.0, 0.0, ParitySector::Even}, 0.0, 3.0, 5, 0.0, 0.45, 4);
  pts.push_back({1.0, 1.0, 0.7, 0.0, ParitySector::Even});  // unstable point: recorded, not fatal
  auto a = gw_sweep(pts, opt, 1);
  auto b = gw_sweep(pts, opt, 3);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].error, b[i].error);
    if (a[i].solution) {
      EXPECT_EQ(a[i].solution->energy, b[i].solution->energy);
      EXPECT_EQ(a[i].solution->psi2, b[i].solution->psi2);
    }
  }
  EXPECT_FALSE(a.back().solution);
  EXPECT_FALSE(a.back().error.empty());
}

TEST(GwSectors, FirstOrderCrossingsAtIntegers) {
  // Near J = 0 the even and odd Fock minima cross at mu = 1 and mu = 2.
  auto roots = gw_parity_crossings({0.0, 1.0, 0.01, 0.0, ParitySector::Even}, 0.5, 2.5, 40);
  ASSERT_EQ(roots.size(), 2u);
  EXPECT_NEAR(roots[0], 1.0, 0.02);
  EXPECT_NEAR(roots[1], 2.0, 0.02);
}
