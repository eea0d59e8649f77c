#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pairhop/circuit.hpp"
#include "pairhop/cli/config.hpp"
#include "pairhop/detail/csv.hpp"
#include "pairhop/detail/parallel.hpp"
#include "pairhop/dissipative.hpp"
#include "pairhop/gutzwiller.hpp"
#include "pairhop/lattice.hpp"
#include "pairhop/semiclassics.hpp"

namespace pairhop::cli {

using pairhop::detail::Cell;
using pairhop::detail::Table;
using Row = std::vector<Cell>;

struct RunResult {
  Table table;
  std::vector<double> point_seconds;  // by grid index
  std::vector<std::string> notes;     // extra provenance lines
  int failures = 0;                   // rows with a non-empty error cell
  double wall_seconds = 0.0;
};

namespace detail {

inline std::vector<double> axis(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return v;
}

inline std::string parity_label(const std::vector<int>& P) {
  std::string s;
  for (int p : P) s += p > 0 ? '+' : '-';
  return s;
}

inline LatticeGraph graph(const RunConfig& c) {
  return c.str("lattice") == "ring" ? LatticeGraph::ring(c.integer("sites")) : LatticeGraph::dimer();
}

inline std::vector<int> parities(const RunConfig& c) {
  std::vector<int> P = c.ints("parities");
  if (P.empty()) P.assign(c.integer("sites"), +1);
  return P;
}

inline Row failed(Row params, size_t width, const std::string& msg) {
  while (params.size() + 1 < width) params.emplace_back(std::string());
  params.emplace_back(msg);
  return params;
}

// Runs body(i) -> rows for every grid index, in parallel, and appends the rows in index order.
// An exception from body(i) becomes a single row produced by fail(i, message).
template <class Body, class Fail>
void fan_out(RunResult& R, size_t n, int workers, Body&& body, Fail&& fail) {
  std::vector<std::vector<Row>> parts(n);
  R.point_seconds.assign(n, 0.0);
  pairhop::detail::parallel_for(n, workers, [&](size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      parts[i] = body(i);
    } catch (const std::exception& e) {
      parts[i] = {fail(i, std::string(e.what()))};
    }
    R.point_seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  for (auto& p : parts)
    for (auto& r : p) R.table.add(std::move(r));
}

// NaN never reaches the file: the cell is blanked and the error column says which one.
inline void finalize(RunResult& R) {
  const size_t err = R.table.columns.size() - 1;
  R.failures = 0;
  for (auto& row : R.table.rows) {
    std::string& e = std::get<std::string>(row[err]);
    for (size_t k = 0; k < err; ++k)
      if (const double* d = std::get_if<double>(&row[k]); d && std::isnan(*d)) {
        row[k] = std::string();
        e += (e.empty() ? "" : "; ") + ("non-finite " + R.table.columns[k]);
      }
    if (!e.empty()) ++R.failures;
  }
}

inline Cell opt_num(bool present, double v) { return present ? Cell(v) : Cell(std::string()); }

inline RunResult run_phase_eq(const RunConfig& c) {
  RunResult R;
  R.table.columns = {"mu",       "J",        "J1",       "sector", "density", "re_psi1",    "im_psi1", "re_psi2",
                     "im_psi2",  "energy",   "f_cat",    "alpha_star", "phase", "converged", "error"};
  EqParams tmpl;
  tmpl.U = c.num("U");
  tmpl.J1 = c.num("J1");
  tmpl.sector = parse_sector(c.str("sector"));
  const auto points = mu_j_grid(tmpl, c.num("mu_min"), c.num("mu_max"), c.integer("mu_count"), c.num("J_min"),
                                c.num("J_max"), c.integer("J_count"));
  GwOptions opt;
  opt.n_max = c.integer("n_max");
  opt.classify_tol = c.num("classify_tol");
  opt.fidelity = c.flag("fidelity");
  const auto rows = gw_sweep(points, opt, c.workers);
  const bool fid = opt.fidelity;
  for (const auto& r : rows) {
    Row row = {r.params.mu, r.params.J, r.params.J1, std::string(to_string(r.params.sector))};
    R.point_seconds.push_back(r.seconds);
    if (!r.solution) {
      R.table.add(failed(row, R.table.columns.size(), r.error));
      continue;
    }
    const GwSolution& s = *r.solution;
    for (Cell v : {Cell(s.density), Cell(s.psi1.real()), Cell(s.psi1.imag()), Cell(s.psi2.real()),
                   Cell(s.psi2.imag()), Cell(s.energy), opt_num(fid, s.f_cat.fidelity),
                   opt_num(fid, std::abs(s.f_cat.alpha_star)), Cell(std::string(to_string(s.phase))),
                   Cell(s.converged), Cell(std::string())})
      row.push_back(v);
    R.table.add(std::move(row));
  }
  return R;
}

inline DissParams diss_point(const RunConfig& c, double delta, double J) {
  const double Gl = c.num("Gamma_l");
  return DissParams::from_rates(delta, c.num("U"), J, Gl, c.num("Gamma_p"), c.num("Gamma_em0_ratio") * Gl,
                                c.num("omega_at"));
}

inline RunResult run_phase_diss_sweep(const RunConfig& c) {
  RunResult R;
  R.table.columns = {"delta",   "J",       "J1",      "Gamma_l", "Gamma_em0", "sector",    "density",
                     "re_psi1", "im_psi1", "re_psi2", "im_psi2", "f_cat",     "alpha_star", "phase",
                     "converged", "stable", "omega_psf", "s_saturation", "error"};
  std::vector<DissParams> points;
  for (double d : axis(c.num("delta_min"), c.num("delta_max"), c.integer("delta_count")))
    for (double J : axis(c.num("J_min"), c.num("J_max"), c.integer("J_count"))) points.push_back(diss_point(c, d, J));
  bool warn = false;
  for (const auto& p : points) warn = warn || p.weak_dissipation_warning();
  if (warn) R.notes.push_back("warning: rates exceed 0.2 min(U, J) at some points; mean-field validity is marginal");
  DissSolveOptions opt;
  opt.n_max = c.integer("n_max");
  opt.even_only = c.str("sector") == "even";
  opt.fidelity = c.flag("fidelity");
  const bool fid = opt.fidelity;
  for (const auto& r : diss_sweep(points, opt, c.workers)) {
    Row row = {r.params.delta, r.params.J, 0.0, r.params.Gamma_l, r.params.Gamma_em0(), c.str("sector")};
    R.point_seconds.push_back(r.seconds);
    if (!r.solution) {
      R.table.add(failed(row, R.table.columns.size(), r.error));
      continue;
    }
    const SteadySolution& s = *r.solution;
    const bool psf = s.psi0 > 1e-4;
    for (Cell v : {Cell(s.density), Cell(0.0), Cell(0.0), Cell(s.psi0), Cell(0.0), opt_num(fid, s.f_cat.fidelity),
                   opt_num(fid, std::abs(s.f_cat.alpha_star)), Cell(std::string(psf ? "PSF" : "NORMAL")),
                   Cell(s.converged), Cell(s.stable), Cell(s.omega_psf), Cell(s.s_saturation), Cell(std::string())})
      row.push_back(v);
    R.table.add(std::move(row));
  }
  return R;
}

inline RunResult run_phase_diss_trajectory(const RunConfig& c) {
  RunResult R;
  R.table.columns = {"t", "re_psi", "im_psi", "n_photon", "p_excited", "purity", "error"};
  const DissParams p = diss_point(c, c.num("delta_min"), c.num("J_min"));
  if (p.weak_dissipation_warning())
    R.notes.push_back("warning: rates exceed 0.2 min(U, J); mean-field validity is marginal");
  const auto t0 = std::chrono::steady_clock::now();
  try {
    double predicted = 0.0;
    if (p.Gamma_em0() > p.Gamma_l) predicted = std::abs(stable_branch(fixed_point(p.semiclassical(), true)).psi0);
    const double alpha = c.num("alpha_init") > 0.0 ? c.num("alpha_init") : std::max(2.0, std::sqrt(predicted));
    int n_max = c.integer("n_max");
    if (n_max == 0) n_max = diss_auto_n_max(p, std::max(predicted, alpha * alpha));
    const SiteSpace sp(n_max, c.str("sector") == "even");
    const CMatrix rho0 = site_product(cat_state(FockSpace(n_max), alpha, +1), sp, true);
    const Trajectory tr = gw_evolve(rho0, p, sp, c.num("t_final"), c.integer("samples"));
    for (size_t i = 0; i < tr.t.size(); ++i)
      R.table.add({tr.t[i], tr.psi[i].real(), tr.psi[i].imag(), tr.n_photon[i], tr.p_excited[i], tr.purity[i],
                   std::string()});
    const SteadySolution s = extract_steady(tr, c.num("window"));
    std::ostringstream os;
    os << "steady: psi0=" << pairhop::detail::format_double(s.psi0)
       << " omega_psf=" << pairhop::detail::format_double(s.omega_psf) << " converged=" << (s.converged ? 1 : 0)
       << " n_max=" << n_max << " alpha_init=" << pairhop::detail::format_double(alpha);
    R.notes.push_back(os.str());
  } catch (const std::exception& e) {
    R.table.rows.clear();
    R.table.add(failed({}, R.table.columns.size(), e.what()));
  }
  R.point_seconds = {std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
  return R;
}

inline RunResult run_exact(const RunConfig& c) {
  RunResult R;
  const LatticeGraph g = graph(c);
  // n_max 0: 30 for verify and spectrum, sized per point for the parity gap.
  const int n_max = c.integer("n_max") > 0 ? c.integer("n_max") : 30;
  const std::string mode = c.str("mode");
  if (mode == "verify") {
    R.table.columns = {"sites", "n_max", "U", "J", "alpha", "parities", "N", "residual", "error"};
    const auto P = parities(c);
    const int N = c.integer("project_N");
    Row head = {static_cast<long long>(g.n_sites), static_cast<long long>(n_max), c.num("U"), c.num("J"),
                c.num("alpha"), parity_label(P), N >= 0 ? Cell(static_cast<long long>(N)) : Cell(std::string())};
    fan_out(
        R, 1, 1,
        [&](size_t) {
          ManyBodyState st = cat_product_state(g, c.num("alpha"), P, n_max);
          if (N >= 0) st = project_total_n(st, N);
          ModelParams mp;
          mp.U = c.num("U");
          mp.J = c.num("J");
          const double res = zero_energy_residual(st, build_h0(g, mp, n_max));
          Row row = head;
          row.emplace_back(res);
          row.emplace_back(std::string());
          return std::vector<Row>{row};
        },
        [&](size_t, const std::string& m) { return failed(head, R.table.columns.size(), m); });
    return R;
  }
  const auto Js = axis(c.num("J_min"), c.num("J_max"), c.integer("J_count"));
  auto model = [&](double J) {
    ModelParams mp;
    mp.U = c.num("U");
    mp.J = J;
    mp.mu = c.num("mu");
    return mp;
  };
  if (mode == "spectrum") {
    R.table.columns = {"J", "k", "eigenvalue", "error"};
    const int k = c.integer("eigenvalues");
    fan_out(
        R, Js.size(), c.workers,
        [&](size_t i) {
          const Eigen::VectorXd ev = lowest_eigenvalues(build_h0(g, model(Js[i]), n_max), k);
          std::vector<Row> rows;
          for (Eigen::Index m = 0; m < ev.size(); ++m)
            rows.push_back({Js[i], static_cast<long long>(m), ev[m], std::string()});
          return rows;
        },
        [&](size_t i, const std::string& m) { return failed({Js[i]}, R.table.columns.size(), m); });
  } else {
    R.table.columns = {"J", "mu", "gap", "error"};
    fan_out(
        R, Js.size(), c.workers,
        [&](size_t i) {
          return std::vector<Row>{{Js[i], c.num("mu"), parity_gap(g, model(Js[i]), c.integer("n_max") > 0 ? n_max : parity_gap_n_max(model(Js[i]))),
                                  std::string()}};
        },
        [&](size_t i, const std::string& m) { return failed({Js[i], c.num("mu")}, R.table.columns.size(), m); });
  }
  return R;
}

inline RunResult run_semiclassical(const RunConfig& c) {
  RunResult R;
  R.table.columns = {"Gamma_l", "delta", "J", "psi0", "omega_psf", "s", "branch", "stable", "error"};
  struct Point {
    double Gl, delta, J;
  };
  std::vector<Point> pts;
  for (double Gl : c.numbers("Gamma_l"))
    for (double d : axis(c.num("delta_min"), c.num("delta_max"), c.integer("delta_count")))
      for (double J : axis(c.num("J_min"), c.num("J_max"), c.integer("J_count"))) pts.push_back({Gl, d, J});
  fan_out(
      R, pts.size(), c.workers,
      [&](size_t i) {
        SemiParams sp;
        sp.delta = pts[i].delta;
        sp.U = c.num("U");
        sp.J = pts[i].J;
        sp.Gamma_l = pts[i].Gl;
        sp.Gamma_p = c.num("Gamma_p");
        sp.Gamma_em0 = c.num("Gamma_em0_ratio") * pts[i].Gl;
        sp.omega_at = c.num("omega_at");
        sp.keep_plus_one = c.flag("keep_plus_one");
        sp.keep_lamb_shift = c.flag("keep_lamb_shift");
        std::vector<Row> rows;
        for (const FixedPoint& fp : fixed_point(sp, c.flag("saturating"), c.flag("stability"))) {
          const double psi = fp.divergent ? std::numeric_limits<double>::infinity() : std::abs(fp.psi0);
          rows.push_back({pts[i].Gl, pts[i].delta, pts[i].J, psi, fp.omega_psf, fp.s,
                          std::string(to_string(fp.branch)), fp.stable, std::string()});
        }
        return rows;
      },
      [&](size_t i, const std::string& m) {
        return failed({pts[i].Gl, pts[i].delta, pts[i].J}, R.table.columns.size(), m);
      });
  return R;
}

inline RunResult run_circuit(const RunConfig& c) {
  namespace ckt = pairhop::circuit;
  RunResult R;
  R.table.columns = {"delta", "omega_c", "eta", "eta1", "U0", "U_eff", "J", "J1", "J_over_Ueff", "near_special",
                     "error"};
  const ckt::QubitSpec q{c.num("E_J"), c.num("alpha"), c.num("E_c"), c.num("phi0")};
  ckt::SnailSpec s{c.num("E_Jc"), c.num("alpha_c"), c.num("phi_c"), c.integer("n_large"), std::nullopt};
  if (c.has("c2")) {
    s.c23 = std::array<double, 2>{c.num("c2"), c.num("c3")};
    s.alpha_c = s.phi_c = 0.0;
  }
  ckt::ResonatorSpec r;
  r.Z = c.num("Z");
  if (c.has("E_c_aux")) {
    r.E_c_aux = c.num("E_c_aux");
    r.E_J_aux = c.num("E_J_aux");
  }
  if (q.transmonic_warning()) R.notes.push_back("warning: E_J/E_c < 20, qubit is outside the transmon regime");
  R.notes.push_back("units: MHz (frequencies with the 2 pi implicit)");
  R.notes.push_back("flux-mismatch reference: cross-Kerr <= " +
                    pairhop::detail::format_double(ckt::kCrossKerrMax / 1e6) + " MHz, auxiliary self-Kerr <= " +
                    pairhop::detail::format_double(ckt::kAuxSelfKerrMax / 1e6) + " MHz");
  const auto deltas = axis(c.num("delta_min"), c.num("delta_max"), c.integer("delta_count"));
  const int z = c.integer("z");
  fan_out(
      R, deltas.size(), c.workers,
      [&](size_t i) {
        const ckt::DerivedCouplings d = ckt::derive_lattice(q, s, r, deltas[i], z);
        const double M = 1e6;
        const Cell ratio = d.U_eff != 0.0 ? Cell(d.J / d.U_eff) : Cell(std::string());
        return std::vector<Row>{{deltas[i] / M, d.omega_c / M, d.eta / M, d.eta1 / M, d.U0 / M, d.U_eff / M, d.J / M,
                                 d.J1 / M, ratio, d.near_special_point, std::string()}};
      },
      [&](size_t i, const std::string& m) { return failed({deltas[i] / 1e6}, R.table.columns.size(), m); });
  try {
    const ckt::DerivedCouplings d = ckt::derive_lattice(q, s, r, deltas.front() != 0.0 ? deltas.front() : 1.0, z);
    R.notes.push_back("phi_zpf=" + pairhop::detail::format_double(d.phi_zpf) +
                      " phi_zpf_aux=" + pairhop::detail::format_double(d.phi_zpf_aux) +
                      " special_detuning_MHz=" +
                      (d.U0 > 0.0 ? pairhop::detail::format_double(ckt::special_detuning(d) / 1e6) : "none"));
  } catch (const std::exception&) {
    // the rows already carry the error
  }
  return R;
}

inline ManyBodyState lattice_state(const RunConfig& c) {
  ManyBodyState st = cat_product_state(graph(c), c.num("alpha"), parities(c), c.integer("n_max"));
  if (c.integer("project_N") >= 0) st = project_total_n(st, c.integer("project_N"));
  return st;
}

inline RunResult run_wigner(const RunConfig& c) {
  RunResult R;
  R.table.columns = {"re_alpha", "im_alpha", "w_red", "error"};
  RadialGrid grid;
  grid.nodes = c.integer("nodes");
  if (c.num("rho_max") > 0.0) grid.rho_max = c.num("rho_max");
  std::vector<std::pair<double, double>> pts;
  for (double y : axis(c.num("im_min"), c.num("im_max"), c.integer("im_count")))
    for (double x : axis(c.num("re_min"), c.num("re_max"), c.integer("re_count"))) pts.emplace_back(x, y);
  std::optional<ReducedWigner> W;
  std::string setup_error;
  try {
    W.emplace(lattice_state(c), c.integer("site"), c.integer("other"), grid);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  fan_out(
      R, pts.size(), c.workers,
      [&](size_t i) {
        if (!W) throw Error(setup_error);
        return std::vector<Row>{{pts[i].first, pts[i].second, (*W)(cplx(pts[i].first, pts[i].second)), std::string()}};
      },
      [&](size_t i, const std::string& m) { return failed({pts[i].first, pts[i].second}, R.table.columns.size(), m); });
  return R;
}

inline RunResult run_transport(const RunConfig& c) {
  RunResult R;
  R.table.columns = {"delta", "J", "G", "Gamma_l", "parities", "residual", "error"};
  const LatticeGraph g = graph(c);
  const auto P = parities(c);
  ModelParams mp;
  mp.U = c.num("U");
  mp.J = c.num("J");
  const auto deltas = axis(c.num("delta_min"), c.num("delta_max"), c.integer("delta_count"));
  fan_out(
      R, deltas.size(), c.workers,
      [&](size_t i) {
        const double res = transport_residual(g, mp, c.num("G"), c.num("Gamma_l"), deltas[i], P, c.integer("n_max"),
                                              c.integer("drive_site"));
        return std::vector<Row>{{deltas[i], mp.J, c.num("G"), c.num("Gamma_l"), parity_label(P), res, std::string()}};
      },
      [&](size_t i, const std::string& m) {
        return failed({deltas[i], mp.J, c.num("G"), c.num("Gamma_l"), parity_label(P)}, R.table.columns.size(), m);
      });
  return R;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline RunResult run(const RunConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult R;
  const std::string& cmd = c.command;
  if (cmd == "phase-eq")
    R = detail::run_phase_eq(c);
  else if (cmd == "phase-diss")
    R = c.str("mode") == "trajectory" ? detail::run_phase_diss_trajectory(c) : detail::run_phase_diss_sweep(c);
  else if (cmd == "exact")
    R = detail::run_exact(c);
  else if (cmd == "semiclassical")
    R = detail::run_semiclassical(c);
  else if (cmd == "circuit")
    R = detail::run_circuit(c);
  else if (cmd == "wigner")
    R = detail::run_wigner(c);
  else if (cmd == "transport")
    R = detail::run_transport(c);
  else
    throw ConfigError("unknown command '" + cmd + "'; accepted values: " + join(commands()));
  detail::finalize(R);
  R.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return R;
}

// `#` provenance lines followed by the table. Nothing here depends on timing or worker count.
inline void write_table(std::ostream& os, const RunConfig& c, const RunResult& R) {
  os << "# pairhop " << kVersion << '\n';
  os << "# command: " << c.command << '\n';
  os << "# config_hash: " << config_hash(c) << '\n';
  os << "# config: " << c.canonical() << '\n';
  for (const auto& n : R.notes) os << "# " << n << '\n';
  pairhop::detail::write_csv(os, R.table);
}

inline json metadata(const RunConfig& c, const RunResult& R, int workers_used) {
  json m;
  m["version"] = kVersion;
  m["command"] = c.command;
  m["config_hash"] = config_hash(c);
  m["timestamp"] = detail::utc_timestamp();
  m["workers"] = workers_used;
  m["wall_seconds"] = R.wall_seconds;
  m["rows"] = R.table.rows.size();
  m["failures"] = R.failures;
  m["point_seconds"] = R.point_seconds;
  return m;
}

inline int exit_status(const RunResult& R) { return R.failures > 0 ? 1 : 0; }

}  // namespace pairhop::cli
