#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pairhop/lattice.hpp"

using namespace pairhop;

namespace {

Eigen::VectorXd dense_spectrum(const SparseMatrix& H) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es{CMatrix(H)};
  return es.eigenvalues();
}

double commutator_norm(const SparseMatrix& A, const SparseMatrix& B) {
  SparseMatrix C = A * B - B * A;
  return CMatrix(C).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(BuildH0, PureInteractionSpectrum) {
  ModelParams p{1.3, 0.0, 0.0, 0.0};
  SparseOperator H = build_h0(LatticeGraph::dimer(), p, 5);
  std::vector<double> expect;
  for (int a = 0; a <= 5; ++a)
    for (int b = 0; b <= 5; ++b) expect.push_back(0.65 * (a * (a - 1) + b * (b - 1)));
  std::sort(expect.begin(), expect.end());
  Eigen::VectorXd ev = dense_spectrum(H.matrix);
  for (size_t k = 0; k < expect.size(); ++k) EXPECT_NEAR(ev[k], expect[k], 1e-12);
}

TEST(BuildH0, ZeroGroundEnergyInEveryParitySectorAtJStar) {
  ModelParams p{1.0, 0.5, 0.0, 0.0};
  for (int p1 : {1, -1})
    for (int p2 : {1, -1}) {
      SparseOperator H = build_h0(LatticeGraph::dimer(), p, 6, Sector::parity({p1, p2}));
      EXPECT_NEAR(dense_spectrum(H.matrix)[0], 0.0, 1e-10) << p1 << ' ' << p2;
      EXPECT_NEAR(lowest_eigenvalues(H, 1)[0], 0.0, 1e-10);
    }
}

TEST(BuildH0, PositiveBelowJStarUnboundedAbove) {
  for (double J : {0.1, 0.3, 0.5}) {
    SparseOperator H = build_h0(LatticeGraph::dimer(), {1.0, J, 0.0, 0.0}, 6);
    EXPECT_GE(dense_spectrum(H.matrix).minCoeff(), -1e-10) << J;
  }
  SparseOperator H = build_h0(LatticeGraph::dimer(), {1.0, 0.6, 0.0, 0.0}, 10);
  EXPECT_LT(dense_spectrum(H.matrix).minCoeff(), -0.1);
}

TEST(BuildH0, HermitianAndSymmetries) {
  LatticeGraph ring = LatticeGraph::ring(3);
  SparseOperator H = build_h0(ring, {1.0, 0.37, 0.0, 0.4}, 4);
  EXPECT_LT(CMatrix(H.matrix - SparseMatrix(H.matrix.adjoint())).norm(), 1e-14);
  EXPECT_EQ(commutator_norm(H.matrix, number_operator(*H.basis)), 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(commutator_norm(H.matrix, local_parity(*H.basis, i)), 0.0);

  SparseOperator H1 = build_h0(ring, {1.0, 0.37, 0.05, 0.4}, 4);
  EXPECT_EQ(commutator_norm(H1.matrix, number_operator(*H1.basis)), 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_GT(commutator_norm(H1.matrix, local_parity(*H1.basis, i)), 1e-3);
}

TEST(BuildH0, SingleHoppingRejectsParitySector) {
  EXPECT_THROW(build_h0(LatticeGraph::dimer(), {1.0, 0.3, 0.1, 0.0}, 4, Sector::parity({1, 1})),
               std::invalid_argument);
}

TEST(BuildH0, CapacityError) {
  EXPECT_THROW(build_h0(LatticeGraph::ring(8), {1.0, 0.3, 0.0, 0.0}, 12), CapacityError);
}

TEST(BuildH0, MomentumSpaceQuadraticForm) {
  // H0 (mu = 0, J1 = 0) on a ring equals sum_k eps_k B_k^dag B_k with B_k = L^{-1/2} sum_i e^{-ik i} a_i^2.
  const int L = 4;
  LatticeGraph ring = LatticeGraph::ring(L);
  const double U = 1.0, J = 0.31;
  SparseOperator H = build_h0(ring, {U, J, 0.0, 0.0}, 3);
  const OccupationBasis& B = *H.basis;
  std::vector<SparseMatrix> a2;
  for (int i = 0; i < L; ++i) a2.push_back(site_lowering(B, i, 2));
  CMatrix Hq = CMatrix::Zero(B.size(), B.size());
  for (int m = 0; m < L; ++m) {
    const double k = 2.0 * std::numbers::pi * m / L;
    const double eps = U / 2 - (J / ring.z) * 2.0 * std::cos(k);
    SparseMatrix Bk(B.size(), B.size());
    for (int i = 0; i < L; ++i) Bk += std::polar(1.0 / std::sqrt(double(L)), -k * i) * a2[i];
    Hq += eps * CMatrix(SparseMatrix(Bk.adjoint()) * Bk);
  }
  EXPECT_LT((Hq - CMatrix(H.matrix)).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(Hq);
  EXPECT_LT((es.eigenvalues() - dense_spectrum(H.matrix)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BuildH0, CoordinateExport) {
  SparseOperator H = build_h0(LatticeGraph::dimer(), {1.0, 0.2, 0.0, 0.0}, 3);
  std::ostringstream os;
  export_coo(H, os);
  std::istringstream is(os.str());
  int r, c, lines = 0;
  double re, im;
  CMatrix rebuilt = CMatrix::Zero(H.matrix.rows(), H.matrix.cols());
  while (is >> r >> c >> re >> im) {
    rebuilt(r, c) = cplx(re, im);
    ++lines;
  }
  EXPECT_EQ(lines, H.matrix.nonZeros());
  EXPECT_EQ((rebuilt - CMatrix(H.matrix)).norm(), 0.0);
}

TEST(Lanczos, AgreesWithDense) {
  SparseOperator H = build_h0(LatticeGraph::ring(4), {1.0, 0.27, 0.04, 0.9}, 5);
  Eigen::VectorXd ref = detail::dense_lowest(H.matrix, 3);
  Eigen::VectorXd lz = detail::lanczos_lowest(H.matrix, 3);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(lz[k], ref[k], 1e-9);
}

TEST(CatProduct, VacuumAndParities) {
  ManyBodyState vac = cat_product_state(LatticeGraph::dimer(), 0.0, {1, 1}, 6);
  EXPECT_NEAR(std::abs(vac.amplitudes[0]), 1.0, 1e-15);
  ManyBodyState st = cat_product_state(LatticeGraph::dimer(), 1.5, {1, -1}, 20);
  const CVector& v = st.amplitudes;
  EXPECT_NEAR(v.dot(local_parity(*st.basis, 0) * v).real(), 1.0, 1e-14);
  EXPECT_NEAR(v.dot(local_parity(*st.basis, 1) * v).real(), -1.0, 1e-14);
  EXPECT_THROW(cat_product_state(LatticeGraph::dimer(), 0.0, {1, -1}, 6), DegenerateCatError);
}

TEST(CatProduct, ZeroEnergyAtJStar) {
  SparseOperator H = build_h0(LatticeGraph::dimer(), {1.0, 0.5, 0.0, 0.0}, 30);
  for (int p1 : {1, -1})
    for (int p2 : {1, -1}) {
      ManyBodyState st = cat_product_state(LatticeGraph::dimer(), 1.5, {p1, p2}, 30);
      EXPECT_LT(zero_energy_residual(st, H), 1e-8);
    }
}

TEST(CatProduct, ResidualAwayFromJStarMatchesIdentity) {
  const double U = 1.0, J = 0.4;
  const cplx alpha(1.5, 0.0);
  SparseOperator H = build_h0(LatticeGraph::dimer(), {U, J, 0.0, 0.0}, 30);
  ManyBodyState st = cat_product_state(LatticeGraph::dimer(), alpha, {1, -1}, 30);
  CVector rhs = CVector::Zero(st.amplitudes.size());
  for (int i = 0; i < 2; ++i) rhs += SparseMatrix(site_lowering(*st.basis, i, 2).adjoint()) * st.amplitudes;
  const double expect = std::abs(U / 2 - J) * std::norm(alpha) * rhs.norm();
  const double got = zero_energy_residual(st, H);
  EXPECT_GT(got, 0.1);
  EXPECT_NEAR(got, expect, 1e-8);
}

TEST(CatProduct, VacuumResidualIsZero) {
  for (double J : {0.0, 0.2, 0.7}) {
    SparseOperator H = build_h0(LatticeGraph::dimer(), {1.0, J, 0.0, 0.0}, 8);
    EXPECT_EQ(zero_energy_residual(cat_product_state(LatticeGraph::dimer(), 0.0, {1, 1}, 8), H), 0.0);
  }
}

TEST(CatProduct, FreeEvolutionRotatesAmplitude) {
  const double mu = 0.8, t = 1.3;
  const cplx alpha(1.1, 0.2);
  LatticeGraph g = LatticeGraph::dimer();
  ManyBodyState st = cat_product_state(g, alpha, {1, -1}, 24);
  CMatrix N = CMatrix(number_operator(*st.basis));
  CMatrix U = (cplx(0.0, -mu * t) * N).exp();
  CVector evolved = U * st.amplitudes;
  CVector target = cat_product_state(g, alpha * std::polar(1.0, -mu * t), {1, -1}, 24).amplitudes;
  EXPECT_LT((evolved - target).norm(), 1e-8);
}

TEST(Projection, OddNumberFromEvenParitiesIsEmpty) {
  ManyBodyState st = cat_product_state(LatticeGraph::dimer(), 1.5, {1, 1}, 20);
  EXPECT_THROW(project_total_n(st, 3), EmptySectorError);
}

TEST(Projection, EigenstateAtMinusMuN) {
  const double mu = 0.7;
  SparseOperator H = build_h0(LatticeGraph::dimer(), {1.0, 0.5, 0.0, mu}, 20);
  ManyBodyState st = project_total_n(cat_product_state(LatticeGraph::dimer(), 1.5, {1, 1}, 20), 4);
  CVector r = H.matrix * st.amplitudes + 4.0 * mu * st.amplitudes;
  EXPECT_LT(r.norm(), 1e-8);
  EXPECT_NEAR(st.amplitudes.dot(number_operator(*st.basis) * st.amplitudes).real(), 4.0, 1e-12);
}

TEST(Projection, NormMatchesPairWeightSum) {
  const double r = 1.5;
  const int N = 6, n_max = 30;
  ManyBodyState st = cat_product_state(LatticeGraph::dimer(), r, {1, 1}, n_max);
  CVector kept = st.amplitudes;
  double weight = 0.0;
  for (Eigen::Index s = 0; s < kept.size(); ++s) {
    const int* o = st.basis->occupation(s);
    if (o[0] + o[1] == N) weight += std::norm(kept[s]);
  }
  // Oracle: even-cat amplitudes are proportional to r^n / sqrt(n!), normalized by cosh(r^2).
  long double oracle = 0;
  for (int n1 = 0; n1 <= N; n1 += 2) {
    const int n2 = N - n1;
    const long double c1 = std::pow(static_cast<long double>(r), n1) / std::sqrt(std::tgamma(n1 + 1.0L));
    const long double c2 = std::pow(static_cast<long double>(r), n2) / std::sqrt(std::tgamma(n2 + 1.0L));
    oracle += c1 * c1 * c2 * c2;
  }
  oracle /= std::cosh(static_cast<long double>(r * r)) * std::cosh(static_cast<long double>(r * r));
  EXPECT_NEAR(weight, static_cast<double>(oracle), 1e-12);
}

TEST(ParityGap, VanishesAtJStar) {
  EXPECT_LT(parity_gap(LatticeGraph::dimer(), {1.0, 0.5, 0.0, 0.0}, 40), 1e-9);
}

TEST(ParityGap, AtomicLimit) {
  const double mu = 1.2, U = 1.0;
  double even = 1e300, odd = 1e300;
  for (int n = 0; n < 20; ++n) {
    const double e = -mu * n + 0.5 * U * n * (n - 1);
    (n % 2 == 0 ? even : odd) = std::min(n % 2 == 0 ? even : odd, e);
  }
  EXPECT_NEAR(parity_gap(LatticeGraph::dimer(), {U, 0.0, 0.0, mu}, 30), std::abs(even - odd), 1e-12);
  EXPECT_NEAR(parity_gap(LatticeGraph::ring(3), {U, 0.0, 0.0, mu}, 8), std::abs(even - odd), 1e-10);
}

TEST(ParityGap, GenericPathAgreesWithTridiagonalPath) {
  ModelParams p{1.0, 0.33, 0.0, 1.2};
  for (int N : {4, 8, 10})
    for (int P : {1, -1}) {
      const double tri = detail::dimer_sector_lowest<double>(p, 1, 30, N, P, 200);
      const double gen = detail::sector_lowest_generic(LatticeGraph::dimer(), p, 30, N, P);
      EXPECT_NEAR(tri, gen, 1e-10);
    }
}

TEST(ParityGap, DecreasesTowardJStar) {
  const double g1 = parity_gap(LatticeGraph::dimer(), {1.0, 0.35, 0.0, 1.2}, 80);
  const double g2 = parity_gap(LatticeGraph::dimer(), {1.0, 0.42, 0.0, 1.2}, 80);
  EXPECT_GT(g1, g2);
  EXPECT_GT(g2, 0.0);
}

TEST(ReducedWigner, SymmetryOriginAndNormalization) {
  const int N = 4, n_max = 8;
  ManyBodyState st = project_total_n(cat_product_state(LatticeGraph::dimer(), 1.0, {1, 1}, n_max), N);
  ReducedWigner W(st, 0, 1);
  EXPECT_NEAR(W(0.0), 2.0 / std::numbers::pi, 1e-6);
  for (cplx a : {cplx(0.4, 0.1), cplx(-1.2, 0.9), cplx(0.0, 2.0)}) EXPECT_NEAR(W(-a), W(a), 1e-9);

  // disk integral in polar coordinates: Gauss-Legendre in r, uniform in theta
  std::vector<double> r, w;
  detail::gauss_legendre(60, 0.0, std::sqrt(double(n_max)) + 4.0, r, w);
  double total = 0.0;
  const int nt = 64;
  for (size_t q = 0; q < r.size(); ++q)
    for (int k = 0; k < nt; ++k) total += w[q] * r[q] * (2 * std::numbers::pi / nt) * W(std::polar(r[q], 2 * std::numbers::pi * k / nt));
  EXPECT_NEAR(total, 1.0, 2e-3);
}

TEST(ReducedWigner, OddSiteOrigin) {
  ManyBodyState st = project_total_n(cat_product_state(LatticeGraph::dimer(), 1.0, {-1, 1}, 9), 5);
  EXPECT_NEAR(reduced_wigner(st, 0, 1, 0.0), -2.0 / std::numbers::pi, 1e-6);
  EXPECT_THROW(reduced_wigner(st, 1, 1, 0.0), std::invalid_argument);
}

TEST(Transport, ExactSteadyStateAtJStar) {
  for (auto P : {std::vector<int>{1, 1}, std::vector<int>{1, -1}})
    EXPECT_LT(transport_residual(LatticeGraph::dimer(), {1.0, 0.5, 0.0, 0.0}, 0.05, 0.1, 0.0, P, 24), 1e-8);
}

TEST(Transport, VacuumWithoutDrive) {
  EXPECT_EQ(transport_residual(LatticeGraph::dimer(), {1.0, 0.5, 0.0, 0.0}, 0.0, 0.1, 0.0, {1, 1}, 10), 0.0);
}

TEST(Transport, DetuningBreaksSteadyState) {
  EXPECT_GT(transport_residual(LatticeGraph::dimer(), {1.0, 0.5, 0.0, 0.0}, 0.05, 0.1, 0.2, {1, 1}, 24), 1e-3);
}

TEST(ThreeWave, MagicCoupling) {
  const double U0 = 1.0, Delta = 4.0;
  const double eta_star = std::sqrt(U0 * Delta) / 2.0;
  EXPECT_LT(three_wave_residual(U0, Delta, eta_star, 1.0, {1, -1}, 26, 16), 1e-7);
  EXPECT_GT(three_wave_residual(U0, Delta, 0.8 * eta_star, 1.0, {1, -1}, 26, 16), 1e-3);
  EXPECT_EQ(three_wave_residual(U0, Delta, 0.3, 0.0, {1, 1}, 10, 6), 0.0);
}
