#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "pairhop/detail/parallel.hpp"
#include "pairhop/detail/rk45.hpp"
#include "pairhop/errors.hpp"
#include "pairhop/fock.hpp"
#include "pairhop/semiclassics.hpp"

namespace pairhop {

// One photon mode with pair hopping in mean field, one incoherently pumped two-level emitter.
// Everything is written in the frame rotating at omega_at/2 per photon and omega_at per excitation.
struct DissParams {
  double delta = 0.0;  // omega_at/2 - omega_c
  double U = 1.0;
  double J = 0.0;
  double Omega_R = 0.0;
  double Gamma_l = 0.0;
  double Gamma_p = 1.0;
  double omega_at = 0.0;

  static DissParams from_rates(double delta, double U, double J, double Gamma_l, double Gamma_p, double Gamma_em0,
                               double omega_at = 0.0) {
    return {delta, U, J, 0.5 * std::sqrt(Gamma_em0 * Gamma_p), Gamma_l, Gamma_p, omega_at};
  }

  double Gamma_em0() const { return 4.0 * Omega_R * Omega_R / Gamma_p; }
  double omega_c() const { return omega_at / 2.0 - delta; }

  // Mean-field validity needs the rates small against the coherent energy scales.
  bool weak_dissipation_warning() const {
    const double scale = 0.2 * std::min(U, J);
    return Gamma_em0() > scale || Gamma_l > scale;
  }

  void validate() const {
    if (Gamma_l < 0.0 || !(Gamma_p > 0.0) || Omega_R < 0.0)
      throw std::invalid_argument("DissParams: rates must be >= 0 (Gamma_p > 0)");
    if (!std::isfinite(delta) || !std::isfinite(U) || !std::isfinite(J) || !std::isfinite(Omega_R))
      throw std::invalid_argument("DissParams: non-finite parameter");
  }

  SemiParams semiclassical() const {
    SemiParams s;
    s.delta = delta;
    s.U = U;
    s.J = J;
    s.Gamma_l = Gamma_l;
    s.Gamma_p = Gamma_p;
    s.Gamma_em0 = Gamma_em0();
    s.omega_at = omega_at;
    return s;
  }
};

// Photon levels (all, or even only) times emitter {g, e}; index = 2 * photon_slot + s, s = 1 is e.
struct SiteSpace {
  int n_max = 0;
  bool even_only = true;
  std::vector<int> photons;

  SiteSpace(int n_max_, bool even_only_) : n_max(n_max_), even_only(even_only_) {
    if (n_max < 2) throw std::invalid_argument("SiteSpace: n_max must be >= 2");
    for (int n = 0; n <= n_max; n += even_only ? 2 : 1) photons.push_back(n);
  }
  int dim() const { return 2 * static_cast<int>(photons.size()); }
};

struct Trajectory {
  std::vector<double> t;
  std::vector<cplx> psi;  // <a^2> in the rotating frame
  std::vector<double> n_photon, p_excited, purity, parity;
  double omega_frame = 0.0;  // add to phase velocities to get lab frequencies
  CMatrix final_rho;
};

struct SteadySolution {
  double psi0 = 0.0;
  double psi0_std = 0.0;
  double omega_psf = 0.0;  // lab frame
  double omega_std = 0.0;
  bool omega_defined = false;
  double s_saturation = 0.0;
  double density = 0.0;
  CatFit f_cat;
  bool converged = false;
  bool stable = false;  // linear stability of the self-consistent flow at this solution
  double growth_rate = 0.0;
  CMatrix rho;          // site density in the frame co-rotating with the limit cycle
};

// Tr_emitter of a site density, embedded in the full Fock basis 0..n_max.
inline CMatrix photon_reduced(const CMatrix& rho, const SiteSpace& sp) {
  CMatrix out = CMatrix::Zero(sp.n_max + 1, sp.n_max + 1);
  const int P = static_cast<int>(sp.photons.size());
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < P; ++j)
      out(sp.photons[i], sp.photons[j]) = rho(2 * i, 2 * j) + rho(2 * i + 1, 2 * j + 1);
  return out;
}

// |photon><photon| (x) |e><e| (emitter_excited) or |g><g|.
inline CMatrix site_product(const Ket& photon, const SiteSpace& sp, bool emitter_excited) {
  if (photon.amplitudes.size() != sp.n_max + 1) throw std::invalid_argument("site_product: photon dimension mismatch");
  CVector v = CVector::Zero(sp.dim());
  const int s = emitter_excited ? 1 : 0;
  for (size_t i = 0; i < sp.photons.size(); ++i) v[2 * i + s] = photon.amplitudes[sp.photons[i]];
  for (int n = 0; n <= sp.n_max; ++n)
    if (std::find(sp.photons.begin(), sp.photons.end(), n) == sp.photons.end() && std::abs(photon.amplitudes[n]) > 0.0)
      throw std::invalid_argument("site_product: photon state has weight outside the site space");
  return v * v.adjoint();
}

namespace detail {

using SpMatC = Eigen::SparseMatrix<cplx>;

inline SpMatC kron(const SpMatC& A, const SpMatC& B) {
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<size_t>(A.nonZeros() * B.nonZeros()));
  for (int ka = 0; ka < A.outerSize(); ++ka)
    for (SpMatC::InnerIterator ia(A, ka); ia; ++ia)
      for (int kb = 0; kb < B.outerSize(); ++kb)
        for (SpMatC::InnerIterator ib(B, kb); ib; ++ib)
          t.emplace_back(ia.row() * B.rows() + ib.row(), ia.col() * B.cols() + ib.col(), ia.value() * ib.value());
  SpMatC K(A.rows() * B.rows(), A.cols() * B.cols());
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

}  // namespace detail

struct LimitCycleOptions {
  double tol = 1e-10;  // on |Tr a^2 rho - psi|
  int max_iter = 60;
  double fd_step = 1e-6;
};

class DissModel {
 public:
  DissModel(const DissParams& p, const SiteSpace& sp) : p_(p), sp_(sp) {
    p_.validate();
    const int P = static_cast<int>(sp_.photons.size());
    const int d = sp_.dim();
    A2_ = CMatrix::Zero(d, d);
    SM_ = CMatrix::Zero(d, d);
    N_ = CMatrix::Zero(d, d);
    Ne_ = CMatrix::Zero(d, d);
    Pi_ = CMatrix::Zero(d, d);
    for (int i = 0; i < P; ++i) {
      const int n = sp_.photons[i];
      for (int s = 0; s < 2; ++s) {
        N_(2 * i + s, 2 * i + s) = n;
        Ne_(2 * i + s, 2 * i + s) = s;
        Pi_(2 * i + s, 2 * i + s) = (n % 2 == 0) ? 1.0 : -1.0;
      }
      SM_(2 * i, 2 * i + 1) = 1.0;
      // a^2 |n> = sqrt(n (n-1)) |n-2>
      for (int j = 0; j < P; ++j)
        if (sp_.photons[j] == n - 2)
          for (int s = 0; s < 2; ++s) A2_(2 * j + s, 2 * i + s) = std::sqrt(double(n) * (n - 1));
    }
    H0_ = -p_.delta * N_;
    for (int k = 0; k < d; ++k) H0_(k, k) += 0.5 * p_.U * N_(k, k).real() * (N_(k, k).real() - 1.0);
    H0_ += p_.Omega_R * (CMatrix(A2_.adjoint()) * SM_ + A2_ * CMatrix(SM_.adjoint()));
    A2dA2_ = A2_.adjoint() * A2_;
    SP_ = SM_.adjoint();
    SMSP_ = SM_ * SP_;  // sigma^- sigma^+ = |g><g|
  }

  const DissParams& params() const { return p_; }
  const SiteSpace& space() const { return sp_; }
  const CMatrix& a2() const { return A2_; }
  const CMatrix& photon_number() const { return N_; }
  const CMatrix& excited() const { return Ne_; }
  const CMatrix& parity() const { return Pi_; }

  cplx pair_field(const CMatrix& rho) const { return (A2_ * rho).trace(); }

  CMatrix hamiltonian(cplx psi, double omega_rel = 0.0) const {
    CMatrix H = H0_ - p_.J * (psi * CMatrix(A2_.adjoint()) + std::conj(psi) * A2_);
    if (omega_rel != 0.0) H -= (omega_rel / 2.0) * (N_ + 2.0 * Ne_);
    return H;
  }

  // d rho / dt with the pair field taken from rho itself.
  CMatrix rhs(const CMatrix& rho) const {
    const cplx I(0.0, 1.0);
    const CMatrix H = hamiltonian(pair_field(rho));
    CMatrix out = -I * (H * rho - rho * H);
    if (p_.Gamma_l > 0.0)
      out += p_.Gamma_l * (A2_ * rho * A2_.adjoint() - 0.5 * (A2dA2_ * rho + rho * A2dA2_));
    if (p_.Gamma_p > 0.0) out += p_.Gamma_p * (SP_ * rho * SM_ - 0.5 * (SMSP_ * rho + rho * SMSP_));
    return out;
  }

  Trajectory evolve(const CMatrix& rho0, double t_final, int n_samples, const detail::Rk45Options& opt = {}) const {
    const int d = sp_.dim();
    if (rho0.rows() != d || rho0.cols() != d) throw std::invalid_argument("evolve: rho0 dimension mismatch");
    if (!(t_final > 0.0) || n_samples < 2) throw std::invalid_argument("evolve: need t_final > 0, >= 2 samples");
    std::vector<double> samples(n_samples);
    for (int i = 0; i < n_samples; ++i) samples[i] = t_final * i / (n_samples - 1);
    Trajectory tr;
    tr.omega_frame = p_.omega_at;
    auto as_matrix = [d](const Eigen::VectorXcd& y) { return Eigen::Map<const CMatrix>(y.data(), d, d); };
    Eigen::VectorXcd y0 = Eigen::Map<const Eigen::VectorXcd>(CMatrix(rho0).data(), d * d);
    detail::rk45_integrate(
        [&](double, const Eigen::VectorXcd& y) {
          const CMatrix r = rhs(as_matrix(y));
          return Eigen::VectorXcd(Eigen::Map<const Eigen::VectorXcd>(r.data(), d * d));
        },
        y0, 0.0, samples,
        [&](double t, const Eigen::VectorXcd& y) {
          const CMatrix r = as_matrix(y);
          tr.t.push_back(t);
          tr.psi.push_back(pair_field(r));
          tr.n_photon.push_back((N_ * r).trace().real());
          tr.p_excited.push_back((Ne_ * r).trace().real());
          tr.purity.push_back((r * r).trace().real());
          tr.parity.push_back((Pi_ * r).trace().real());
          tr.final_rho = r;
        },
        [d](Eigen::VectorXcd& y) {
          Eigen::Map<CMatrix> r(y.data(), d, d);
          const CMatrix h = 0.5 * (r + r.adjoint());
          r = h;
        },
        opt);
    return tr;
  }

  // Linear Lindbladian at a fixed field psi in the frame co-rotating at omega_rel (column-stacked vec).
  // Every call returns the same sparsity pattern.
  detail::SpMatC liouvillian(cplx psi, double omega_rel) const {
    prepare_superoperator();
    const CMatrix H = hamiltonian(psi, omega_rel);
    SpMatC L = L_fixed_;
    const SpMatC Hs = H.sparseView(0.0, 0.0);
    L += -cplx(0.0, 1.0) * (detail::kron(Id_, Hs) - detail::kron(SpMatC(Hs.transpose()), Id_));
    L += L_skeleton_;  // explicit zeros keep the pattern identical across calls
    return L;
  }

  // Steady state of the linear Lindbladian at a fixed field psi, in the frame co-rotating at omega_rel.
  CMatrix steady_state(cplx psi, double omega_rel) const {
    const int d = sp_.dim();
    SpMatC L = liouvillian(psi, omega_rel);
    // replace row 0 by the trace functional
    L.prune([](const Eigen::Index& r, const Eigen::Index&, const cplx&) { return r != 0; });
    L += trace_row_;
    L.makeCompressed();
    if (!pattern_ready_ || L.nonZeros() != pattern_nnz_) {
      lu_.analyzePattern(L);
      pattern_ready_ = true;
      pattern_nnz_ = L.nonZeros();
    }
    lu_.factorize(L);
    if (lu_.info() != Eigen::Success) throw Error("steady_state: singular Liouvillian");
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(d) * d);
    b[0] = 1.0;
    Eigen::VectorXcd x = lu_.solve(b);
    CMatrix rho = Eigen::Map<CMatrix>(x.data(), d, d);
    return 0.5 * (rho + rho.adjoint());
  }

  // Dense linearization of the self-consistent flow around a stationary rho (co-rotating frame).
  // Only sensible for small spaces; used as an oracle for stability().
  CMatrix linearization_dense(double psi, double omega_rel, const CMatrix& rho) const {
    CMatrix Lin = CMatrix(liouvillian(psi, omega_rel));
    auto [U, V] = feedback_vectors(rho);
    Lin += U * V.transpose();
    return Lin;
  }

  // Eigenvalues of the linearized flow nearest the real shift sigma, from shift-invert Arnoldi on the
  // trace-free subspace. The feedback through psi = Tr a^2 rho is a rank-2 update handled by Woodbury.
  struct Stability {
    bool stable = false;
    double growth = 0.0;  // largest real part among converged modes, phase mode excluded
    std::vector<cplx> modes;
  };

  Stability stability(double psi, double omega_rel, const CMatrix& rho, int krylov = 40, double sigma = 0.0) const {
    const int d = sp_.dim();
    const Eigen::Index n = static_cast<Eigen::Index>(d) * d;
    if (sigma <= 0.0) sigma = std::max({p_.Gamma_em0(), p_.Gamma_l, 1e-3 * p_.Gamma_p});
    SpMatC A = liouvillian(psi, omega_rel);
    SpMatC S(n, n);
    S.setIdentity();
    A -= sigma * S;
    A.makeCompressed();
    Eigen::SparseLU<SpMatC> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw Error("stability: shifted Liouvillian is singular");
    auto [U, V] = feedback_vectors(rho);
    const Eigen::MatrixXcd AiU = lu.solve(U);
    const Eigen::Matrix2cd cap = Eigen::Matrix2cd::Identity() + V.transpose() * AiU;
    const Eigen::PartialPivLU<Eigen::Matrix2cd> cap_lu(cap);
    // trace functional: 1 at the diagonal positions
    auto project_traceless = [d](Eigen::VectorXcd& x) {
      cplx tr = 0.0;
      for (int i = 0; i < d; ++i) tr += x[i * d + i];
      for (int i = 0; i < d; ++i) x[i * d + i] -= tr / double(d);
    };
    auto apply = [&](const Eigen::VectorXcd& x) {
      Eigen::VectorXcd y = lu.solve(x);
      y -= AiU * cap_lu.solve(V.transpose() * y);
      return y;
    };
    const int m = std::min<int>(krylov, static_cast<int>(n) - 1);
    Eigen::MatrixXcd Q(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    Eigen::VectorXcd q(n);
    for (Eigen::Index i = 0; i < n; ++i) q[i] = cplx(std::cos(0.37 * i + 0.1), std::sin(1.13 * i));  // fixed start
    project_traceless(q);
    Q.col(0) = q.normalized();
    int k = 0;
    bool breakdown = false;
    for (; k < m; ++k) {
      Eigen::VectorXcd w = apply(Q.col(k));
      project_traceless(w);
      for (int pass = 0; pass < 2; ++pass) {  // Gram-Schmidt, repeated once for orthogonality
        const Eigen::VectorXcd h = Q.leftCols(k + 1).adjoint() * w;
        w -= Q.leftCols(k + 1) * h;
        H.block(0, k, k + 1, 1) += h;
      }
      H(k + 1, k) = w.norm();
      if (std::abs(H(k + 1, k)) < 1e-14) {
        ++k;
        breakdown = true;
        break;
      }
      Q.col(k + 1) = w / H(k + 1, k);
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(k, k));
    Stability out;
    out.growth = -std::numeric_limits<double>::infinity();
    const double scale = sigma;
    for (int i = 0; i < k; ++i) {
      const cplx theta = es.eigenvalues()[i];
      if (std::abs(theta) < 1e-300) continue;
      const double resid = std::abs(H(k, k - 1)) * std::abs(es.eigenvectors()(k - 1, i));
      if (!breakdown && resid > 1e-6 * std::abs(theta)) continue;  // not converged
      const cplx lambda = sigma + 1.0 / theta;
      out.modes.push_back(lambda);
      if (std::abs(lambda) < 1e-7 * scale) continue;  // phase (Goldstone) mode of a rotating solution
      out.growth = std::max(out.growth, lambda.real());
    }
    std::sort(out.modes.begin(), out.modes.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
    out.stable = out.growth < 1e-9 * std::max(1.0, scale);
    return out;
  }

  // Newton iteration on (Re Tr a^2 rho - psi, Im Tr a^2 rho) for real psi >= 0 and omega'.
  // Returns nullopt when it fails to converge to a nontrivial root.
  std::optional<std::pair<double, double>> limit_cycle(double psi, double w, const LimitCycleOptions& opt = {}) const {
    auto F = [&](double x, double y) {
      const cplx m = pair_field(steady_state(x, y));
      return Eigen::Vector2d(m.real() - x, m.imag());
    };
    Eigen::Vector2d f = F(psi, w);
    for (int it = 0; it < opt.max_iter; ++it) {
      if (f.norm() < opt.tol) return std::make_pair(psi, w);
      const double hx = opt.fd_step * std::max(1.0, psi), hy = opt.fd_step * std::max(1.0, std::abs(w));
      Eigen::Matrix2d Jm;
      Jm.col(0) = (F(psi + hx, w) - f) / hx;
      Jm.col(1) = (F(psi, w + hy) - f) / hy;
      Eigen::Vector2d step = Jm.fullPivLu().solve(-f);
      if (!step.allFinite()) return std::nullopt;
      // backtracking keeps psi positive and the residual decreasing
      double lam = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 30; ++bt, lam *= 0.5) {
        const double xn = psi + lam * step[0], yn = w + lam * step[1];
        if (xn <= 0.0) continue;
        const Eigen::Vector2d fn = F(xn, yn);
        if (fn.norm() < f.norm() * (1.0 - 1e-4 * lam)) {
          psi = xn;
          w = yn;
          f = fn;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (f.norm() < opt.tol) return std::make_pair(psi, w);
    return std::nullopt;
  }

  SteadySolution summarize(double psi, double w, const CMatrix& rho, bool fidelity) const {
    SteadySolution s;
    s.psi0 = psi;
    s.omega_defined = psi > 0.0;
    s.omega_psf = s.omega_defined ? p_.omega_at + w : 0.0;
    s.rho = rho;
    s.density = (N_ * rho).trace().real();
    const double pe = (Ne_ * rho).trace().real();
    const double X = 2.0 * pe - 1.0;
    s.s_saturation = X > 0.0 ? 1.0 / X - 1.0 : std::numeric_limits<double>::infinity();
    if (fidelity) s.f_cat = cat_fidelity(DensityOp{photon_reduced(rho, sp_)});
    s.converged = true;
    return s;
  }

 private:
  using SpMatC = detail::SpMatC;

  // Feedback of a density perturbation on the flow through its pair field:
  // delta(d rho/dt) = i J (Tr[a^2 x] [a^dag2, rho] + Tr[a^dag2 x] [a^2, rho]) = U V^T vec(x).
  std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> feedback_vectors(const CMatrix& rho) const {
    const int d = sp_.dim();
    const Eigen::Index n = static_cast<Eigen::Index>(d) * d;
    const cplx iJ(0.0, p_.J);
    const CMatrix A2d = A2_.adjoint();
    const CMatrix c1 = iJ * (A2d * rho - rho * A2d), c2 = iJ * (A2_ * rho - rho * A2_);
    Eigen::MatrixXcd U(n, 2), V(n, 2);
    U.col(0) = Eigen::Map<const Eigen::VectorXcd>(c1.data(), n);
    U.col(1) = Eigen::Map<const Eigen::VectorXcd>(c2.data(), n);
    // Tr[B x] = sum_ij B(j, i) x(i, j), i.e. vec(B^T) . vec(x)
    const CMatrix t1 = A2_.transpose(), t2 = A2d.transpose();
    V.col(0) = Eigen::Map<const Eigen::VectorXcd>(t1.data(), n);
    V.col(1) = Eigen::Map<const Eigen::VectorXcd>(t2.data(), n);
    return {U, V};
  }

  void prepare_superoperator() const {
    if (superop_ready_) return;
    const int d = sp_.dim();
    Id_ = SpMatC(d, d);
    Id_.setIdentity();
    auto sparse = [](const CMatrix& M) { return SpMatC(M.sparseView(0.0, 0.0)); };
    auto dissipator = [&](const CMatrix& c, double g) {
      const SpMatC cs = sparse(c), cdc = sparse(c.adjoint() * c);
      return SpMatC(g * (detail::kron(SpMatC(cs.conjugate()), cs) - 0.5 * detail::kron(Id_, cdc) -
                         0.5 * detail::kron(SpMatC(cdc.transpose()), Id_)));
    };
    L_fixed_ = dissipator(A2_, p_.Gamma_l) + dissipator(SP_, p_.Gamma_p);
    // zero-valued entries at every position any Hamiltonian can touch
    CMatrix mask = CMatrix::Identity(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (H0_(i, j) != 0.0 || A2_(i, j) != 0.0 || A2_(j, i) != 0.0) mask(i, j) = 1.0;
    SpMatC M = sparse(mask);
    SpMatC sk = detail::kron(Id_, M) + detail::kron(SpMatC(M.transpose()), Id_);
    for (int k = 0; k < sk.outerSize(); ++k)
      for (SpMatC::InnerIterator it(sk, k); it; ++it) it.valueRef() = 0.0;
    L_skeleton_ = sk;
    std::vector<Eigen::Triplet<cplx>> tr;
    for (int i = 0; i < d; ++i) tr.emplace_back(0, i * d + i, 1.0);
    trace_row_ = SpMatC(d * d, d * d);
    trace_row_.setFromTriplets(tr.begin(), tr.end());
    superop_ready_ = true;
  }

  DissParams p_;
  SiteSpace sp_;
  CMatrix A2_, SM_, SP_, N_, Ne_, Pi_, H0_, A2dA2_, SMSP_;

  mutable bool superop_ready_ = false;
  mutable SpMatC Id_, L_fixed_, L_skeleton_, trace_row_;
  mutable Eigen::SparseLU<SpMatC> lu_;
  mutable bool pattern_ready_ = false;
  mutable Eigen::Index pattern_nnz_ = 0;
};

inline CMatrix gw_rhs(const CMatrix& rho, const DissParams& p, const SiteSpace& sp) { return DissModel(p, sp).rhs(rho); }

inline Trajectory gw_evolve(const CMatrix& rho0, const DissParams& p, const SiteSpace& sp, double t_final,
                            int n_samples = 1001, const detail::Rk45Options& opt = {}) {
  return DissModel(p, sp).evolve(rho0, t_final, n_samples, opt);
}

// Window statistics over the final `window` fraction of a trajectory.
inline SteadySolution extract_steady(const Trajectory& tr, double window = 0.2, double zero_tol = 1e-6) {
  const size_t n = tr.t.size();
  if (n < 3 || !(window > 0.0) || window > 1.0) throw std::invalid_argument("extract_steady: need >= 3 samples and 0 < window <= 1");
  const double t_start = tr.t.back() - window * (tr.t.back() - tr.t.front());
  size_t i0 = 0;
  while (i0 + 2 < n && tr.t[i0] < t_start) ++i0;
  SteadySolution s;
  std::vector<double> mag;
  for (size_t i = i0; i < n; ++i) mag.push_back(std::abs(tr.psi[i]));
  auto mean_std = [](const std::vector<double>& v, double& m, double& sd) {
    m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    sd = 0.0;
    for (double x : v) sd += (x - m) * (x - m);
    sd = std::sqrt(sd / v.size());
  };
  mean_std(mag, s.psi0, s.psi0_std);
  const double peak = *std::max_element(mag.begin(), mag.end());
  if (peak < zero_tol) {
    s.converged = true;
    s.omega_defined = false;
    return s;
  }
  s.converged = std::abs(mag.back() - mag.front()) <= 1e-6 * s.psi0;
  std::vector<double> vel;
  for (size_t i = i0 + 1; i < n; ++i) {
    const double dphi = std::arg(tr.psi[i] / tr.psi[i - 1]);  // unwrapped increment
    vel.push_back(-dphi / (tr.t[i] - tr.t[i - 1]));
  }
  mean_std(vel, s.omega_psf, s.omega_std);
  s.omega_psf += tr.omega_frame;
  s.omega_defined = true;
  if (!tr.final_rho.size()) return s;
  s.rho = tr.final_rho;
  return s;
}

inline int diss_auto_n_max(const DissParams& p, double psi_hint = 0.0) {
  double scale = psi_hint;
  if (p.Gamma_l > 0.0 && p.Gamma_em0() > p.Gamma_l)
    scale = std::max(scale, std::sqrt((p.Gamma_p / p.Gamma_l - p.Gamma_p / p.Gamma_em0()) / 2.0));
  return std::min(200, 2 * static_cast<int>(std::ceil(1.5 * scale + 12.0)));
}

struct DissSolveOptions {
  int n_max = 0;  // 0: automatic
  bool even_only = true;
  bool fidelity = true;
  LimitCycleOptions newton;
  int scan_psi = 14;    // seed grid rows over (0, 1.15 psi_max]
  int scan_omega = 29;  // seed grid columns over the gain window, 1.2 w_th on each side
};

// Seeds from every nontrivial semiclassical root, first with the +1 term and frequency pull restored
// (closest to the full model), then the bare relations.
inline std::vector<std::pair<double, double>> semiclassical_seeds(const DissParams& p) {
  std::vector<std::pair<double, double>> seeds;
  for (bool full : {true, false}) {
    SemiParams sp = p.semiclassical();
    sp.keep_plus_one = full;
    sp.keep_lamb_shift = full;
    for (const FixedPoint& fp : fixed_point(sp, true, false))
      if (fp.branch != Branch::Trivial) seeds.emplace_back(std::abs(fp.psi0), fp.omega_rel);
  }
  return seeds;
}

namespace detail {

struct CycleRoot {
  double psi, omega;
  DissModel::Stability stab;
};

// Cells of a (psi, omega') grid where both components of Tr a^2 rho_ss - psi change sign.
inline std::vector<std::pair<double, double>> grid_seeds(const DissModel& model, double psi_lo, double psi_hi,
                                                         double w_half, int n_psi, int n_w) {
  std::vector<std::pair<double, double>> out;
  if (n_psi < 2 || n_w < 2 || !(psi_hi > psi_lo)) return out;
  std::vector<double> xs(n_psi), ws(n_w);
  for (int i = 0; i < n_psi; ++i) xs[i] = psi_lo + (psi_hi - psi_lo) * i / (n_psi - 1);
  for (int j = 0; j < n_w; ++j) ws[j] = -w_half + 2.0 * w_half * j / (n_w - 1);
  std::vector<cplx> F(static_cast<size_t>(n_psi) * n_w);
  for (int i = 0; i < n_psi; ++i)
    for (int j = 0; j < n_w; ++j) F[i * n_w + j] = model.pair_field(model.steady_state(xs[i], ws[j])) - xs[i];
  for (int i = n_psi - 2; i >= 0; --i)  // largest psi first
    for (int j = 0; j + 1 < n_w; ++j) {
      const cplx c[4] = {F[i * n_w + j], F[i * n_w + j + 1], F[(i + 1) * n_w + j], F[(i + 1) * n_w + j + 1]};
      bool rp = false, rn = false, ip = false, in = false;
      for (cplx v : c) {
        (v.real() > 0 ? rp : rn) = true;
        (v.imag() > 0 ? ip : in) = true;
      }
      if (rp && rn && ip && in) out.emplace_back(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ws[j] + ws[j + 1]));
    }
  return out;
}

}  // namespace detail

// Steady limit cycle of the self-consistent site problem: the largest linearly stable root of
// Tr a^2 rho_ss(psi, omega') = psi. Newton starts from the extra seeds (e.g. continuation), the
// semiclassical roots, and a sign-change grid above the best stable root found so far.
inline SteadySolution solve_limit_cycle(const DissParams& p, const DissSolveOptions& opt = {},
                                        const std::vector<std::pair<double, double>>& extra_seeds = {}) {
  p.validate();
  const bool above = p.Gamma_l > 0.0 && p.Gamma_em0() > p.Gamma_l;
  std::vector<std::pair<double, double>> seeds = extra_seeds;
  if (above)
    for (auto s : semiclassical_seeds(p)) seeds.push_back(s);
  double hint = 0.0;
  for (auto s : seeds) hint = std::max(hint, s.first);
  const int n_max = opt.n_max > 0 ? opt.n_max : diss_auto_n_max(p, hint);
  DissModel model(p, SiteSpace(n_max, opt.even_only));

  std::vector<detail::CycleRoot> roots;
  auto try_seed = [&](double x, double y) {
    auto r = model.limit_cycle(x, y, opt.newton);
    if (!r || r->first <= 1e-6) return;
    for (const auto& q : roots)
      if (std::abs(q.psi - r->first) < 1e-6 * std::max(1.0, q.psi) && std::abs(q.omega - r->second) < 1e-6) return;
    const CMatrix rho = model.steady_state(r->first, r->second);
    roots.push_back({r->first, r->second, model.stability(r->first, r->second, rho)});
  };
  auto best_stable = [&]() {
    double b = 0.0;
    for (const auto& q : roots)
      if (q.stab.stable) b = std::max(b, q.psi);
    return b;
  };
  if (above) {
    for (auto [x, y] : seeds) try_seed(x, y);
    const double pm = psi_max_jc(p.semiclassical(), 0.0).psi_max;
    const double w_th = (p.Gamma_p / 2.0) * std::sqrt(p.Gamma_em0() / p.Gamma_l - 1.0);
    const double hi = 1.15 * pm, step = hi / opt.scan_psi;
    const double lo = std::max(step, step * std::floor(best_stable() / step));
    const int rows = static_cast<int>(std::lround((hi - lo) / step)) + 1;
    for (auto [x, y] : detail::grid_seeds(model, lo, hi, 1.2 * w_th, rows, opt.scan_omega)) try_seed(x, y);
  }
  std::sort(roots.begin(), roots.end(), [](const auto& a, const auto& b) { return a.psi > b.psi; });
  for (const auto& q : roots)
    if (q.stab.stable) {
      SteadySolution s = model.summarize(q.psi, q.omega, model.steady_state(q.psi, q.omega), opt.fidelity);
      s.stable = true;
      s.growth_rate = q.stab.growth;
      return s;
    }
  const CMatrix rho = model.steady_state(0.0, 0.0);
  SteadySolution s = model.summarize(0.0, 0.0, rho, opt.fidelity);
  const auto st = model.stability(0.0, 0.0, rho);
  s.stable = st.stable;
  s.growth_rate = st.growth;
  s.converged = st.stable;  // no attracting stationary state was found otherwise
  return s;
}

struct DissRow {
  DissParams params;
  std::optional<SteadySolution> solution;
  std::string error;
  double seconds = 0.0;
};

// Rows of constant delta are solved independently (in parallel); along each row J is swept in
// ascending order with the previous root as an extra seed. Output order equals input order.
inline std::vector<DissRow> diss_sweep(const std::vector<DissParams>& points, const DissSolveOptions& opt = {},
                                       int workers = 0) {
  std::vector<DissRow> rows(points.size());
  std::vector<double> deltas;
  for (const auto& p : points) deltas.push_back(p.delta);
  std::sort(deltas.begin(), deltas.end());
  deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());
  detail::parallel_for(deltas.size(), workers, [&](std::size_t k) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < points.size(); ++i)
      if (points[i].delta == deltas[k]) idx.push_back(i);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return points[a].J < points[b].J; });
    std::optional<std::pair<double, double>> prev;
    for (size_t i : idx) {
      rows[i].params = points[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        std::vector<std::pair<double, double>> extra;
        if (prev) extra.push_back(*prev);
        SteadySolution s = solve_limit_cycle(points[i], opt, extra);
        if (s.psi0 > 0.0)
          prev = std::make_pair(s.psi0, s.omega_psf - points[i].omega_at);
        else
          prev.reset();
        s.rho.resize(0, 0);  // sweeps keep only the summary
        rows[i].solution = std::move(s);
      } catch (const std::exception& e) {
        rows[i].error = e.what();
        prev.reset();
      }
      rows[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });
  return rows;
}

}  // namespace pairhop
