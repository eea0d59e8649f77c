#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "pairhop/detail/eigs.hpp"
#include "pairhop/errors.hpp"
#include "pairhop/fock.hpp"

namespace pairhop {

using SparseMatrix = Eigen::SparseMatrix<cplx>;

struct LatticeGraph {
  int n_sites = 2;
  std::vector<std::pair<int, int>> edges;
  int z = 1;

  static LatticeGraph dimer() { return {2, {{0, 1}}, 1}; }

  static LatticeGraph ring(int L) {
    if (L < 3) throw std::invalid_argument("ring needs at least 3 sites");
    LatticeGraph g{L, {}, 2};
    for (int i = 0; i < L; ++i) g.edges.emplace_back(i, (i + 1) % L);
    return g;
  }

  void validate() const {
    if (n_sites < 1) throw std::invalid_argument("lattice: n_sites must be >= 1");
    if (z < 1) throw std::invalid_argument("lattice: coordination number z must be >= 1");
    std::vector<int> degree(n_sites, 0);
    for (auto [i, j] : edges) {
      if (i < 0 || j < 0 || i >= n_sites || j >= n_sites || i == j)
        throw std::invalid_argument("lattice: malformed edge");
      ++degree[i];
      ++degree[j];
    }
    if (!edges.empty() && std::all_of(degree.begin(), degree.end(), [&](int d) { return d == degree[0]; }) &&
        degree[0] != z)
      throw std::invalid_argument("lattice: z inconsistent with the degree of a regular graph");
  }
};

struct ModelParams {
  double U = 1.0;
  double J = 0.0;
  double J1 = 0.0;
  double mu = 0.0;

  void validate() const {
    if (!(U > 0.0)) throw std::invalid_argument("model: U must be > 0");
    if (J < 0.0 || J1 < 0.0) throw std::invalid_argument("model: J and J1 must be >= 0");
  }
};

// Optional filters on the occupation basis. An empty parity list means "no parity filter".
struct Sector {
  std::optional<int> total_n;
  std::vector<int> parities;

  static Sector full() { return {}; }
  static Sector number(int N) { return {N, {}}; }
  static Sector parity(std::vector<int> P) { return {std::nullopt, std::move(P)}; }

  bool contains(const int* occ, int n_sites) const {
    if (total_n) {
      int s = 0;
      for (int i = 0; i < n_sites; ++i) s += occ[i];
      if (s != *total_n) return false;
    }
    if (!parities.empty())
      for (int i = 0; i < n_sites; ++i)
        if (((occ[i] % 2 == 0) ? 1 : -1) != parities[i]) return false;
    return true;
  }
};

constexpr std::int64_t kMaxBasisCodes = 10'000'000;
constexpr std::int64_t kMaxNonzeros = 10'000'000;

// Occupation tuples (n_1..n_L), site 0 most significant, kept in lexicographic order.
class OccupationBasis {
 public:
  OccupationBasis(int n_sites, int n_max, Sector sector = Sector::full())
      : n_sites_(n_sites), n_max_(n_max), sector_(std::move(sector)) {
    if (n_sites < 1 || n_max < 1) throw std::invalid_argument("basis: n_sites and n_max must be >= 1");
    if (!sector_.parities.empty() && static_cast<int>(sector_.parities.size()) != n_sites)
      throw std::invalid_argument("basis: parity vector length must equal n_sites");
    std::int64_t codes = 1;
    for (int i = 0; i < n_sites; ++i) {
      codes *= (n_max + 1);
      if (codes > kMaxBasisCodes)
        throw CapacityError("basis: (n_max+1)^n_sites exceeds the 1e7 enumeration budget");
    }
    index_of_code_.assign(static_cast<size_t>(codes), -1);
    std::vector<int> occ(n_sites, 0);
    for (std::int64_t c = 0; c < codes; ++c) {
      std::int64_t r = c;
      for (int i = n_sites - 1; i >= 0; --i) {
        occ[i] = static_cast<int>(r % (n_max + 1));
        r /= (n_max + 1);
      }
      if (!sector_.contains(occ.data(), n_sites)) continue;
      index_of_code_[c] = static_cast<std::int64_t>(codes_.size());
      codes_.push_back(c);
      occ_.insert(occ_.end(), occ.begin(), occ.end());
    }
  }

  int n_sites() const { return n_sites_; }
  int n_max() const { return n_max_; }
  const Sector& sector() const { return sector_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(codes_.size()); }
  const int* occupation(Eigen::Index idx) const { return occ_.data() + idx * n_sites_; }

  std::int64_t code(const int* occ) const {
    std::int64_t c = 0;
    for (int i = 0; i < n_sites_; ++i) c = c * (n_max_ + 1) + occ[i];
    return c;
  }
  // -1 when the tuple is outside the truncation or the sector
  std::int64_t index(const int* occ) const {
    for (int i = 0; i < n_sites_; ++i)
      if (occ[i] < 0 || occ[i] > n_max_) return -1;
    return index_of_code_[static_cast<size_t>(code(occ))];
  }

 private:
  int n_sites_, n_max_;
  Sector sector_;
  std::vector<std::int64_t> codes_;
  std::vector<std::int64_t> index_of_code_;
  std::vector<int> occ_;
};

using BasisPtr = std::shared_ptr<const OccupationBasis>;

struct ManyBodyState {
  BasisPtr basis;
  CVector amplitudes;
  Sector tag;
};

struct SparseOperator {
  BasisPtr basis;
  SparseMatrix matrix;
};

inline BasisPtr make_basis(int n_sites, int n_max, Sector sector = Sector::full()) {
  return std::make_shared<const OccupationBasis>(n_sites, n_max, std::move(sector));
}

namespace detail {

// Adds c * a_i^{dag p} a_j^{p} + h.c. for every edge, p = 1 or 2.
inline void add_hopping(const OccupationBasis& B, const LatticeGraph& g, int power, double coeff,
                        std::vector<Eigen::Triplet<cplx>>& trip) {
  if (coeff == 0.0) return;
  std::vector<int> occ(B.n_sites());
  for (Eigen::Index s = 0; s < B.size(); ++s) {
    const int* o = B.occupation(s);
    for (auto [p, q] : g.edges)
      for (int dir = 0; dir < 2; ++dir) {
        const int i = dir == 0 ? p : q;  // raised
        const int j = dir == 0 ? q : p;  // lowered
        if (o[j] < power || o[i] + power > B.n_max()) continue;
        std::copy(o, o + B.n_sites(), occ.begin());
        double amp = 1.0;
        for (int k = 0; k < power; ++k) amp *= std::sqrt(static_cast<double>(occ[j] - k));
        for (int k = 1; k <= power; ++k) amp *= std::sqrt(static_cast<double>(occ[i] + k));
        occ[j] -= power;
        occ[i] += power;
        const std::int64_t t = B.index(occ.data());
        if (t < 0) throw std::invalid_argument("hopping leaves the requested sector");
        trip.emplace_back(static_cast<int>(t), static_cast<int>(s), coeff * amp);
      }
  }
}

}  // namespace detail

// U/2 sum n(n-1) - (J/z) sum_<ij> (a_i^dag2 a_j^2 + h.c.) - (J1/z) sum_<ij> (a_i^dag a_j + h.c.) - mu N
inline SparseOperator build_h0(const LatticeGraph& g, const ModelParams& p, int n_max,
                               const Sector& sector = Sector::full()) {
  g.validate();
  p.validate();
  if (p.J1 != 0.0 && !sector.parities.empty())
    throw std::invalid_argument("build_h0: single-particle hopping does not conserve local parity sectors");
  BasisPtr B = make_basis(g.n_sites, n_max, sector);
  const std::int64_t budget = static_cast<std::int64_t>(B->size()) * (1 + 2 * static_cast<std::int64_t>(g.edges.size()) * (p.J1 != 0.0 ? 2 : 1));
  if (budget > kMaxNonzeros) throw CapacityError("build_h0: nonzero budget of 1e7 exceeded");

  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<size_t>(budget));
  for (Eigen::Index s = 0; s < B->size(); ++s) {
    const int* o = B->occupation(s);
    double d = 0.0;
    for (int i = 0; i < g.n_sites; ++i) d += 0.5 * p.U * o[i] * (o[i] - 1.0) - p.mu * o[i];
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), d);
  }
  detail::add_hopping(*B, g, 2, -p.J / g.z, trip);
  detail::add_hopping(*B, g, 1, -p.J1 / g.z, trip);
  SparseMatrix H(B->size(), B->size());
  H.setFromTriplets(trip.begin(), trip.end());
  return {B, H};
}

inline SparseMatrix number_operator(const OccupationBasis& B) {
  SparseMatrix N(B.size(), B.size());
  std::vector<Eigen::Triplet<cplx>> trip;
  for (Eigen::Index s = 0; s < B.size(); ++s) {
    int tot = 0;
    for (int i = 0; i < B.n_sites(); ++i) tot += B.occupation(s)[i];
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), static_cast<double>(tot));
  }
  N.setFromTriplets(trip.begin(), trip.end());
  return N;
}

inline SparseMatrix local_parity(const OccupationBasis& B, int site) {
  SparseMatrix P(B.size(), B.size());
  std::vector<Eigen::Triplet<cplx>> trip;
  for (Eigen::Index s = 0; s < B.size(); ++s)
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), (B.occupation(s)[site] % 2 == 0) ? 1.0 : -1.0);
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

// a_site^power as a sparse matrix on a (full) basis.
inline SparseMatrix site_lowering(const OccupationBasis& B, int site, int power) {
  SparseMatrix A(B.size(), B.size());
  std::vector<Eigen::Triplet<cplx>> trip;
  std::vector<int> occ(B.n_sites());
  for (Eigen::Index s = 0; s < B.size(); ++s) {
    const int* o = B.occupation(s);
    if (o[site] < power) continue;
    std::copy(o, o + B.n_sites(), occ.begin());
    double amp = 1.0;
    for (int k = 0; k < power; ++k) amp *= std::sqrt(static_cast<double>(occ[site] - k));
    occ[site] -= power;
    const std::int64_t t = B.index(occ.data());
    if (t >= 0) trip.emplace_back(static_cast<int>(t), static_cast<int>(s), amp);
  }
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

inline Eigen::VectorXd lowest_eigenvalues(const SparseOperator& H, int k) {
  return detail::lowest_eigenvalues(H.matrix, k);
}

// Coordinate-list text export: one "row col re im" line per stored entry.
inline void export_coo(const SparseOperator& H, std::ostream& os) {
  os.precision(17);
  for (int k = 0; k < H.matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(H.matrix, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag() << '\n';
}

inline ManyBodyState cat_product_state(const LatticeGraph& g, cplx alpha, const std::vector<int>& parities, int n_max) {
  if (static_cast<int>(parities.size()) != g.n_sites)
    throw std::invalid_argument("cat_product_state: parity vector length must equal n_sites");
  const FockSpace s(n_max);
  std::vector<CVector> local;
  for (int P : parities) local.push_back(cat_state(s, alpha, P).amplitudes);
  BasisPtr B = make_basis(g.n_sites, n_max);
  CVector amp(B->size());
  for (Eigen::Index idx = 0; idx < B->size(); ++idx) {
    const int* o = B->occupation(idx);
    cplx v = 1.0;
    for (int i = 0; i < g.n_sites && v != cplx(0.0, 0.0); ++i) v *= local[i][o[i]];
    amp[idx] = v;
  }
  amp.normalize();
  return {B, amp, Sector::parity(parities)};
}

inline ManyBodyState project_total_n(const ManyBodyState& st, int N) {
  ManyBodyState out = st;
  for (Eigen::Index idx = 0; idx < st.basis->size(); ++idx) {
    int tot = 0;
    for (int i = 0; i < st.basis->n_sites(); ++i) tot += st.basis->occupation(idx)[i];
    if (tot != N) out.amplitudes[idx] = 0.0;
  }
  const double nrm = out.amplitudes.norm();
  if (nrm <= 1e-12) throw EmptySectorError("project_total_n: no weight in the N = " + std::to_string(N) + " sector");
  out.amplitudes /= nrm;
  out.tag.total_n = N;
  return out;
}

inline double zero_energy_residual(const ManyBodyState& st, const SparseOperator& H) {
  if (H.matrix.cols() != st.amplitudes.size())
    throw std::invalid_argument("zero_energy_residual: operator and state dimensions differ");
  return (H.matrix * st.amplitudes).norm() / st.amplitudes.norm();
}

namespace detail {

using Extended = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<160>>;

// Two sites, one edge: the (N, P) sector is a chain n1 -> n1 + 2 and hence tridiagonal.
template <class T>
T dimer_sector_lowest(const ModelParams& p, int z, int n_max, int N, int parity, int iters) {
  std::vector<T> diag, off;
  const int start = (parity == 1) ? 0 : 1;
  std::vector<int> n1s;
  for (int n1 = start; n1 <= N; n1 += 2)
    if (n1 <= n_max && N - n1 <= n_max) n1s.push_back(n1);
  if (n1s.empty()) return T(std::numeric_limits<double>::infinity());
  const T U(p.U), mu(p.mu), J(p.J);
  for (int n1 : n1s) {
    const int n2 = N - n1;
    diag.push_back(U / 2 * T(n1 * (n1 - 1) + n2 * (n2 - 1)) - mu * T(N));
  }
  for (size_t k = 0; k + 1 < n1s.size(); ++k) {
    const int n1 = n1s[k], n2 = N - n1;
    using std::sqrt;
    off.push_back(-J / T(z) * sqrt(T(n1 + 1) * T(n1 + 2) * T(n2) * T(n2 - 1)));
  }
  return tridiagonal_lowest<T>(diag, off, iters);
}

inline double sector_lowest_generic(const LatticeGraph& g, const ModelParams& p, int n_max, int N, int parity) {
  Sector sec{N, std::vector<int>(g.n_sites, parity)};
  SparseOperator H = build_h0(g, p, n_max, sec);
  if (H.matrix.rows() == 0) return std::numeric_limits<double>::infinity();
  return lowest_eigenvalues(H, 1)[0];
}

}  // namespace detail

// Per-site cutoff that keeps the grand-canonical minimum inside the space: the occupation of
// the minimizing sector grows like mu / (U - 2J).
inline int parity_gap_n_max(const ModelParams& p) {
  if (!(p.U > 2.0 * p.J)) throw std::invalid_argument("parity_gap_n_max: needs J < U/2");
  const double est = std::max(p.mu, 0.0) / (p.U - 2.0 * p.J);
  return static_cast<int>(std::ceil(3.0 * est)) + 40;
}

// |E_even - E_odd| / n_sites, where E_P is the grand-canonical ground energy with every site
// restricted to local parity P. Two-site graphs are refined in 160-digit arithmetic because the
// gap falls far below double resolution as J -> U/2.
inline double parity_gap(const LatticeGraph& g, const ModelParams& p, int n_max) {
  g.validate();
  p.validate();
  if (p.J1 != 0.0) throw std::invalid_argument("parity_gap: local parity is not conserved when J1 > 0");
  const bool dimer = g.n_sites == 2 && g.edges.size() == 1;

  auto best_energy = [&](int parity) -> detail::Extended {
    const int n_min = parity == 1 ? 0 : g.n_sites;
    const int n_top = g.n_sites * n_max;
    std::vector<std::pair<double, int>> energies;
    double emin = std::numeric_limits<double>::infinity();
    int nmin = n_min;
    for (int N = n_min; N <= n_top; N += 2) {
      const double e = dimer ? detail::dimer_sector_lowest<double>(p, g.z, n_max, N, parity, 200)
                             : detail::sector_lowest_generic(g, p, n_max, N, parity);
      energies.emplace_back(e, N);
      if (e < emin) {
        emin = e;
        nmin = N;
      }
      if (N >= nmin + 12 && e > emin + 5.0 * p.U) break;
    }
    if (!dimer) return detail::Extended(emin);
    std::sort(energies.begin(), energies.end());
    detail::Extended best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < std::min<size_t>(2, energies.size()); ++k) {
      auto e = detail::dimer_sector_lowest<detail::Extended>(p, g.z, n_max, energies[k].second, parity, 600);
      if (e < best) best = e;
    }
    return best;
  };
  detail::Extended diff = best_energy(1) - best_energy(-1);
  using std::abs;
  return static_cast<double>(abs(diff) / g.n_sites);
}

struct RadialGrid {
  int nodes = 64;
  double rho_max = -1.0;  // <= 0: sqrt(n_max) + 5
};

// Reduced Wigner function of site i with site j's phase-space variable integrated along the
// real axis: W(alpha) = Tr[W_i(alpha) sigma_i], sigma_i = Tr_{~i}[(1 (x) M_j) rho],
// M_j = 2 pi int d rho rho W_j(rho).
class ReducedWigner {
 public:
  ReducedWigner(const ManyBodyState& st, int i, int j, const RadialGrid& grid = {}) {
    const OccupationBasis& B = *st.basis;
    if (i == j) throw std::invalid_argument("reduced_wigner: sites must differ");
    if (i < 0 || j < 0 || i >= B.n_sites() || j >= B.n_sites())
      throw std::invalid_argument("reduced_wigner: site index out of range");
    n_max_ = B.n_max();
    const int d = n_max_ + 1;
    const double rmax = grid.rho_max > 0.0 ? grid.rho_max : std::sqrt(static_cast<double>(n_max_)) + 5.0;
    std::vector<double> x, w;
    detail::gauss_legendre(grid.nodes, 0.0, rmax, x, w);
    CMatrix M = CMatrix::Zero(d, d);
    for (size_t q = 0; q < x.size(); ++q) M += (2.0 * std::numbers::pi * w[q] * x[q]) * wigner_operator(n_max_, x[q]);

    // Group amplitudes by the occupations of every site other than i and j.
    std::vector<std::int64_t> rest_code(static_cast<size_t>(B.size()));
    std::vector<std::int64_t> keys;
    for (Eigen::Index s = 0; s < B.size(); ++s) {
      const int* o = B.occupation(s);
      std::int64_t c = 0;
      for (int k = 0; k < B.n_sites(); ++k)
        if (k != i && k != j) c = c * d + o[k];
      rest_code[s] = c;
      keys.push_back(c);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<CMatrix> blocks(keys.size(), CMatrix::Zero(d, d));
    for (Eigen::Index s = 0; s < B.size(); ++s) {
      const auto k = std::lower_bound(keys.begin(), keys.end(), rest_code[s]) - keys.begin();
      const int* o = B.occupation(s);
      blocks[k](o[i], o[j]) += st.amplitudes[s];
    }
    const double nrm2 = st.amplitudes.squaredNorm();
    sigma_ = CMatrix::Zero(d, d);
    for (const CMatrix& P : blocks) sigma_ += P * M.transpose() * P.adjoint();
    sigma_ /= nrm2;
  }

  double operator()(cplx alpha) const {
    return (wigner_operator(n_max_, alpha).cwiseProduct(sigma_.transpose())).sum().real();
  }
  const CMatrix& sigma() const { return sigma_; }

 private:
  int n_max_ = 0;
  CMatrix sigma_;
};

inline double reduced_wigner(const ManyBodyState& st, int i, int j, cplx alpha, const RadialGrid& grid = {}) {
  return ReducedWigner(st, i, j, grid)(alpha);
}

// Liouvillian residual ||L[rho]||_F of the cat product at alpha0 = sqrt(2G/Gamma_l) under
// H0 - delta N + iG(a_0^dag2 - a_0^2) and two-photon loss on the driven site. (mu is ignored.)
inline double transport_residual(const LatticeGraph& g, const ModelParams& params, double G, double gamma_l,
                                 double delta, const std::vector<int>& parities, int n_max, int drive_site = 0) {
  if (!(gamma_l > 0.0)) throw std::invalid_argument("transport_residual: Gamma_l must be > 0");
  if (G < 0.0) throw std::invalid_argument("transport_residual: G must be >= 0");
  ModelParams p = params;
  p.mu = 0.0;
  SparseOperator H0 = build_h0(g, p, n_max);
  const OccupationBasis& B = *H0.basis;
  SparseMatrix A = site_lowering(B, drive_site, 2);
  SparseMatrix Ad = A.adjoint();
  SparseMatrix H = H0.matrix - delta * number_operator(B) + cplx(0.0, G) * (Ad - A);

  const double alpha0 = std::sqrt(2.0 * G / gamma_l);
  CVector psi;
  if (alpha0 == 0.0) {
    for (int P : parities)
      if (P != 1) throw DegenerateCatError();
  }
  psi = cat_product_state(g, alpha0, parities, n_max).amplitudes;

  const CVector h = H * psi;
  const CVector a = A * psi;
  const CVector b = Ad * a;
  const cplx I(0.0, 1.0);
  CMatrix L = -I * (h * psi.adjoint() - psi * h.adjoint()) +
              gamma_l * (a * a.adjoint() - 0.5 * (b * psi.adjoint() + psi * b.adjoint()));
  return L.norm();
}

// ||H psi|| / ||psi|| for two qubit cats at alpha and a resonator coherent state at
// beta = 2 eta alpha^2 / Delta, under U0/2 sum a^dag2 a^2 + Delta b^dag b - eta[(a1^dag2 + a2^dag2) b + h.c.].
inline double three_wave_residual(double U0, double Delta, double eta, cplx alpha, const std::vector<int>& parities,
                                  int n_max_qubit, int n_max_res) {
  if (parities.size() != 2) throw std::invalid_argument("three_wave_residual: two qubit parities expected");
  if (Delta == 0.0) throw std::invalid_argument("three_wave_residual: Delta must be nonzero");
  const std::int64_t dq = n_max_qubit + 1, dr = n_max_res + 1;
  const std::int64_t dim = dq * dq * dr;
  if (dim * 8 > kMaxNonzeros) throw CapacityError("three_wave_residual: dimension budget exceeded");
  const cplx beta = 2.0 * eta * alpha * alpha / Delta;
  const CVector c1 = cat_state(FockSpace(n_max_qubit), alpha, parities[0]).amplitudes;
  const CVector c2 = cat_state(FockSpace(n_max_qubit), alpha, parities[1]).amplitudes;
  const CVector cb = coherent_state(FockSpace(n_max_res), beta).amplitudes;
  auto idx = [&](std::int64_t n1, std::int64_t n2, std::int64_t m) { return (n1 * dq + n2) * dr + m; };
  CVector psi(dim);
  for (int n1 = 0; n1 < dq; ++n1)
    for (int n2 = 0; n2 < dq; ++n2)
      for (int m = 0; m < dr; ++m) psi[idx(n1, n2, m)] = c1[n1] * c2[n2] * cb[m];

  CVector out = CVector::Zero(dim);
  for (int n1 = 0; n1 < dq; ++n1)
    for (int n2 = 0; n2 < dq; ++n2)
      for (int m = 0; m < dr; ++m) {
        const cplx v = psi[idx(n1, n2, m)];
        if (v == cplx(0.0, 0.0)) continue;
        out[idx(n1, n2, m)] += (0.5 * U0 * (n1 * (n1 - 1.0) + n2 * (n2 - 1.0)) + Delta * m) * v;
        // (a_k^dag2) b
        if (m >= 1) {
          const double sb = std::sqrt(static_cast<double>(m));
          if (n1 + 2 < dq) out[idx(n1 + 2, n2, m - 1)] -= eta * sb * std::sqrt((n1 + 1.0) * (n1 + 2.0)) * v;
          if (n2 + 2 < dq) out[idx(n1, n2 + 2, m - 1)] -= eta * sb * std::sqrt((n2 + 1.0) * (n2 + 2.0)) * v;
        }
        // (a_k^2) b^dag
        if (m + 1 < dr) {
          const double sb = std::sqrt(m + 1.0);
          if (n1 >= 2) out[idx(n1 - 2, n2, m + 1)] -= eta * sb * std::sqrt(n1 * (n1 - 1.0)) * v;
          if (n2 >= 2) out[idx(n1, n2 - 2, m + 1)] -= eta * sb * std::sqrt(n2 * (n2 - 1.0)) * v;
        }
      }
  return out.norm() / psi.norm();
}

}  // namespace pairhop
