#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace pairhop::detail {

using SpMat = Eigen::SparseMatrix<std::complex<double>>;

constexpr Eigen::Index kDenseEigenLimit = 4000;

inline Eigen::VectorXd dense_lowest(const SpMat& H, int k) {
  Eigen::MatrixXcd dense = Eigen::MatrixXcd(H);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense, Eigen::EigenvaluesOnly);
  const int m = std::min<int>(k, static_cast<int>(dense.rows()));
  return es.eigenvalues().head(m);
}

// Lanczos with full reorthogonalization; the Krylov space grows until the k lowest
// Ritz values have residual estimates below tol (or the space is exhausted).
inline Eigen::VectorXd lanczos_lowest(const SpMat& H, int k, double tol = 1e-10,
                                      std::uint64_t seed = 12345) {
  const Eigen::Index n = H.rows();
  const int max_m = static_cast<int>(std::min<Eigen::Index>(n, std::max(400, 8 * k)));
  std::vector<Eigen::VectorXcd> V;
  V.reserve(max_m + 1);

  Eigen::VectorXcd v(n);
  std::uint64_t state = seed;
  for (Eigen::Index i = 0; i < n; ++i) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    v[i] = 0.5 + static_cast<double>(state >> 11) * (1.0 / 9007199254740992.0);
  }
  v.normalize();
  V.push_back(v);

  std::vector<double> alpha, beta;
  Eigen::VectorXd ritz;
  for (int j = 0; j < max_m; ++j) {
    Eigen::VectorXcd w = H * V[j];
    const double a = V[j].dot(w).real();
    alpha.push_back(a);
    w -= a * V[j];
    if (j > 0) w -= beta[j - 1] * V[j - 1];
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : V) w -= q.dot(w) * q;
    const double b = w.norm();

    const int m = j + 1;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const int want = std::min(k, m);
    ritz = es.eigenvalues().head(want);
    bool done = (b < 1e-14) || (m == n);
    if (!done && m >= want) {
      done = true;
      for (int i = 0; i < want; ++i)
        if (std::abs(b * es.eigenvectors()(m - 1, i)) > tol * std::max(1.0, std::abs(ritz[i]))) done = false;
    }
    if (done && m >= std::min<Eigen::Index>(k, n)) break;
    beta.push_back(b);
    V.push_back(w / b);
  }
  return ritz;
}

inline Eigen::VectorXd lowest_eigenvalues(const SpMat& H, int k) {
  if (H.rows() == 0) return Eigen::VectorXd();
  if (H.rows() < kDenseEigenLimit) return dense_lowest(H, k);
  return lanczos_lowest(H, k);
}

// Lowest eigenvalue of a real symmetric tridiagonal matrix by Sturm-count bisection.
// T is any field type (double or an extended-precision float).
template <class T>
T tridiagonal_lowest(const std::vector<T>& diag, const std::vector<T>& off, int max_iter) {
  using std::abs;
  const size_t n = diag.size();
  T lo = diag[0], hi = diag[0];
  for (size_t i = 0; i < n; ++i) {
    T r = 0;
    if (i > 0) r += abs(off[i - 1]);
    if (i + 1 < n) r += abs(off[i]);
    if (diag[i] - r < lo) lo = diag[i] - r;
    if (diag[i] < hi) hi = diag[i];
  }
  auto count_below = [&](const T& x) {
    int c = 0;
    T d = diag[0] - x;
    if (d < 0) ++c;
    for (size_t i = 1; i < n; ++i) {
      if (d == 0) d = T(1e-300) * (abs(x) + 1);
      d = diag[i] - x - off[i - 1] * off[i - 1] / d;
      if (d < 0) ++c;
    }
    return c;
  };
  for (int it = 0; it < max_iter; ++it) {
    T mid = (lo + hi) / 2;
    if (mid == lo || mid == hi) break;
    if (count_below(mid) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  return (lo + hi) / 2;
}

// Gauss-Legendre nodes/weights on [a, b] via the Golub-Welsch eigenproblem.
inline void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double bi = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = J(i - 1, i) = bi;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    x[i] = 0.5 * (b - a) * t + 0.5 * (b + a);
    w[i] = (b - a) * v0 * v0;  // 2 v0^2 on [-1, 1], rescaled by (b - a)/2
  }
}

}  // namespace pairhop::detail
