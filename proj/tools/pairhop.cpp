// pairhop: parameter sweeps for the pair-hopping photon lattice, one subcommand per study.
//
//   pairhop phase-eq --config eq.json --out eq.csv --workers 4
//
// Exit status: 0 all points succeeded, 1 some rows carry an error, 2 fatal (bad config, I/O).

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pairhop/cli/runner.hpp"

namespace {

using pairhop::cli::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw pairhop::ConfigError("cannot open config file '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// key=value; the value is read as JSON when it parses, as a bare string otherwise.
void apply_override(json& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw pairhop::ConfigError("--set expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
  json v = json::parse(text, nullptr, false);
  cfg[key] = v.is_discarded() ? json(text) : v;
}

struct Invocation {
  std::string config_path, out, meta_path;
  std::vector<std::string> overrides;
  int workers = -1;
  long long seed = -1;
};

int execute(const std::string& command, const Invocation& inv) {
  json cfg = inv.config_path.empty() ? json::object() : json::parse(read_file(inv.config_path), nullptr, false);
  if (cfg.is_discarded()) throw pairhop::ConfigError("config file '" + inv.config_path + "' is not valid JSON");
  for (const auto& kv : inv.overrides) apply_override(cfg, kv);
  pairhop::cli::RunConfig c = pairhop::cli::parse_config(cfg.dump(), command);
  if (!inv.out.empty()) c.out = inv.out;
  if (inv.workers >= 0) c.workers = inv.workers;
  if (inv.seed >= 0) c.seed = static_cast<std::uint64_t>(inv.seed);

  const pairhop::cli::RunResult R = pairhop::cli::run(c);
  const int workers_used = c.workers > 0 ? c.workers : pairhop::detail::default_workers();
  std::string meta = inv.meta_path;
  if (c.out == "-") {
    pairhop::cli::write_table(std::cout, c, R);
  } else {
    std::ofstream os(c.out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write output file '" + c.out + "'");
    pairhop::cli::write_table(os, c, R);
    os.close();
    if (!os) throw std::runtime_error("write to '" + c.out + "' failed");
    if (meta.empty()) meta = c.out + ".meta.json";
  }
  if (!meta.empty()) {
    std::ofstream ms(meta);
    if (!ms) throw std::runtime_error("cannot write metadata file '" + meta + "'");
    ms << pairhop::cli::metadata(c, R, workers_used).dump(2) << '\n';
  }
  if (R.failures > 0) std::cerr << "pairhop: " << R.failures << " of " << R.table.rows.size() << " rows failed\n";
  return pairhop::cli::exit_status(R);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairhop: pair-hopping photon lattice studies"};
  app.set_version_flag("--version", pairhop::cli::kVersion);
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"phase-eq", "equilibrium Gutzwiller phase diagram over (mu, J)"},
      {"phase-diss", "driven-dissipative Gutzwiller steady states or a single trajectory"},
      {"exact", "exact diagonalization: cat-product residuals, spectra, parity gaps"},
      {"semiclassical", "semiclassical fixed points over (Gamma_l, delta, J)"},
      {"circuit", "circuit parameters to lattice couplings over the detuning"},
      {"wigner", "reduced Wigner function of a cat-product state"},
      {"transport", "Liouvillian residual of the driven two-photon-loss steady state"}};
  Invocation inv;
  for (const auto& [name, help] : subs) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", inv.config_path, "JSON config file (flat key-value)");
    s->add_option("--out", inv.out, "output CSV path, '-' for stdout");
    s->add_option("--meta", inv.meta_path, "timing metadata path (default <out>.meta.json)");
    s->add_option("--workers", inv.workers, "worker threads (default: PAIRHOP_WORKERS or all cores)")
        ->check(CLI::NonNegativeNumber);
    s->add_option("--seed", inv.seed, "master seed, echoed in the provenance header")->check(CLI::NonNegativeNumber);
    s->add_option("--set", inv.overrides, "override a config key, key=value (repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return execute(command, inv);
  } catch (const pairhop::ConfigError& e) {
    std::cerr << "pairhop: config error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "pairhop: " << e.what() << '\n';
  }
  return 2;
}
