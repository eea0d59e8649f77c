#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairhop/errors.hpp"

namespace pairhop::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"phase-eq", "phase-diss", "exact", "semiclassical",
                                             "circuit",  "wigner",     "transport"};
  return c;
}

enum class Kind { Number, Integer, Bool, Choice, NumberList, IntList, NumberOrList, OptNumber };

struct KeySpec {
  std::string name;
  Kind kind;
  json fallback;
  std::vector<std::string> choices = {};
};

inline std::string join(const std::vector<std::string>& v, const char* sep = ", ") {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

// Keys accepted by every command besides its own parameter block.
inline const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> k = {"command", "out", "workers", "seed"};
  return k;
}

inline std::vector<KeySpec> schema(const std::string& command) {
  const json null_value = nullptr;
  if (command == "phase-eq")
    return {{"U", Kind::Number, 1.0},
            {"J1", Kind::Number, 0.0},
            {"sector", Kind::Choice, "even", {"even", "odd", "full"}},
            {"n_max", Kind::Integer, 0},
            {"mu_min", Kind::Number, 0.0},
            {"mu_max", Kind::Number, 3.0},
            {"mu_count", Kind::Integer, 40},
            {"J_min", Kind::Number, 0.0},
            {"J_max", Kind::Number, 0.49},
            {"J_count", Kind::Integer, 40},
            {"classify_tol", Kind::Number, 1e-4},
            {"fidelity", Kind::Bool, true}};
  if (command == "phase-diss")
    return {{"mode", Kind::Choice, "sweep", {"sweep", "trajectory"}},
            {"U", Kind::Number, 0.7},
            {"Gamma_p", Kind::Number, 1.0},
            {"Gamma_l", Kind::Number, 0.01},
            {"Gamma_em0_ratio", Kind::Number, 9.0},
            {"omega_at", Kind::Number, 0.0},
            {"sector", Kind::Choice, "even", {"even", "full"}},
            {"n_max", Kind::Integer, 0},
            {"delta_min", Kind::Number, 1.4},
            {"delta_max", Kind::Number, 1.4},
            {"delta_count", Kind::Integer, 1},
            {"J_min", Kind::Number, 0.05},
            {"J_max", Kind::Number, 0.45},
            {"J_count", Kind::Integer, 9},
            {"fidelity", Kind::Bool, true},
            {"t_final", Kind::Number, 400.0},
            {"samples", Kind::Integer, 1001},
            {"alpha_init", Kind::Number, 0.0},
            {"window", Kind::Number, 0.2}};
  if (command == "exact")
    return {{"mode", Kind::Choice, "verify", {"verify", "spectrum", "gap"}},
            {"lattice", Kind::Choice, "dimer", {"dimer", "ring"}},
            {"sites", Kind::Integer, 2},
            {"n_max", Kind::Integer, 0},
            {"U", Kind::Number, 1.0},
            {"J", Kind::Number, 0.5},
            {"mu", Kind::Number, 0.0},
            {"alpha", Kind::Number, 1.5},
            {"parities", Kind::IntList, json::array()},
            {"project_N", Kind::Integer, -1},
            {"J_min", Kind::Number, 0.35},
            {"J_max", Kind::Number, 0.49},
            {"J_count", Kind::Integer, 8},
            {"eigenvalues", Kind::Integer, 4}};
  if (command == "semiclassical")
    return {{"U", Kind::Number, 0.7},
            {"Gamma_p", Kind::Number, 1.0},
            {"Gamma_l", Kind::NumberOrList, 0.01},
            {"Gamma_em0_ratio", Kind::Number, 9.0},
            {"omega_at", Kind::Number, 0.0},
            {"delta_min", Kind::Number, 1.4},
            {"delta_max", Kind::Number, 1.4},
            {"delta_count", Kind::Integer, 1},
            {"J_min", Kind::Number, 0.0},
            {"J_max", Kind::Number, 0.5},
            {"J_count", Kind::Integer, 51},
            {"saturating", Kind::Bool, true},
            {"keep_plus_one", Kind::Bool, false},
            {"keep_lamb_shift", Kind::Bool, false},
            {"stability", Kind::Bool, true}};
  if (command == "circuit")
    return {{"E_J", Kind::Number, 180e9},
            {"alpha", Kind::Number, 35.0 / 180.0},
            {"E_c", Kind::Number, 0.3e9},
            {"phi0", Kind::Number, std::numbers::pi},
            {"E_Jc", Kind::Number, 25e9},
            {"alpha_c", Kind::Number, 7.25 / 25.0},
            {"phi_c", Kind::Number, 0.92 * std::numbers::pi},
            {"n_large", Kind::Integer, 3},
            {"c2", Kind::OptNumber, null_value},
            {"c3", Kind::OptNumber, null_value},
            {"Z", Kind::Number, 10.0},
            {"E_c_aux", Kind::OptNumber, null_value},
            {"E_J_aux", Kind::OptNumber, null_value},
            {"z", Kind::Integer, 1},
            {"delta_min", Kind::Number, 5e6},
            {"delta_max", Kind::Number, 100e6},
            {"delta_count", Kind::Integer, 20}};
  if (command == "wigner")
    return {{"lattice", Kind::Choice, "dimer", {"dimer", "ring"}},
            {"sites", Kind::Integer, 2},
            {"n_max", Kind::Integer, 24},
            {"alpha", Kind::Number, 1.5},
            {"parities", Kind::IntList, json::array()},
            {"project_N", Kind::Integer, -1},
            {"site", Kind::Integer, 0},
            {"other", Kind::Integer, 1},
            {"re_min", Kind::Number, -4.0},
            {"re_max", Kind::Number, 4.0},
            {"re_count", Kind::Integer, 41},
            {"im_min", Kind::Number, 0.0},
            {"im_max", Kind::Number, 0.0},
            {"im_count", Kind::Integer, 1},
            {"nodes", Kind::Integer, 64},
            {"rho_max", Kind::Number, 0.0}};
  if (command == "transport")
    return {{"lattice", Kind::Choice, "dimer", {"dimer", "ring"}},
            {"sites", Kind::Integer, 2},
            {"n_max", Kind::Integer, 24},
            {"U", Kind::Number, 1.0},
            {"J", Kind::Number, 0.5},
            {"G", Kind::Number, 0.5},
            {"Gamma_l", Kind::Number, 1.0},
            {"parities", Kind::IntList, json::array()},
            {"drive_site", Kind::Integer, 0},
            {"delta_min", Kind::Number, 0.0},
            {"delta_max", Kind::Number, 0.2},
            {"delta_count", Kind::Integer, 3}};
  throw ConfigError("unknown command '" + command + "'; accepted values: " + join(commands()));
}

struct RunConfig {
  std::string command;
  json params;  // every schema key, defaults filled in
  std::set<std::string> given;  // keys present in the input
  std::string out = "-";
  int workers = 0;  // 0: PAIRHOP_WORKERS or the hardware thread count
  std::uint64_t seed = 0;

  double num(const std::string& k) const { return params.at(k).get<double>(); }
  int integer(const std::string& k) const { return params.at(k).get<int>(); }
  bool flag(const std::string& k) const { return params.at(k).get<bool>(); }
  std::string str(const std::string& k) const { return params.at(k).get<std::string>(); }
  bool has(const std::string& k) const { return !params.at(k).is_null(); }

  std::vector<double> numbers(const std::string& k) const {
    const json& v = params.at(k);
    if (v.is_array()) return v.get<std::vector<double>>();
    return {v.get<double>()};
  }
  std::vector<int> ints(const std::string& k) const { return params.at(k).get<std::vector<int>>(); }

  // Everything that determines the output; the run location and worker count are left out.
  std::string canonical() const {
    json c = params;
    c["command"] = command;
    c["seed"] = seed;
    return c.dump();
  }
};

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(c.canonical());
  return os.str();
}

namespace detail {

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Number: return "a number";
    case Kind::Integer: return "an integer";
    case Kind::Bool: return "a boolean";
    case Kind::Choice: return "a string";
    case Kind::NumberList: return "an array of numbers";
    case Kind::IntList: return "an array of integers";
    case Kind::NumberOrList: return "a number or an array of numbers";
    case Kind::OptNumber: return "a number or null";
  }
  return "?";
}

inline bool is_int(const json& v) {
  if (v.is_number_integer()) return true;
  return v.is_number_float() && std::floor(v.get<double>()) == v.get<double>();
}

inline json coerce(const KeySpec& s, const json& v) {
  auto bad = [&]() -> ConfigError {
    std::string msg = "key '" + s.name + "' must be " + kind_name(s.kind) + ", got " + v.dump();
    if (s.kind == Kind::Choice) msg += "; accepted values: " + join(s.choices);
    return ConfigError(msg);
  };
  switch (s.kind) {
    case Kind::Number:
      if (!v.is_number() || !std::isfinite(v.get<double>())) throw bad();
      return v.get<double>();
    case Kind::Integer:
      if (!is_int(v)) throw bad();
      return static_cast<long long>(v.get<double>());
    case Kind::Bool:
      if (!v.is_boolean()) throw bad();
      return v;
    case Kind::Choice:
      if (!v.is_string()) throw bad();
      for (const auto& c : s.choices)
        if (c == v.get<std::string>()) return v;
      throw ConfigError("key '" + s.name + "' has value " + v.dump() + "; accepted values: " + join(s.choices));
    case Kind::OptNumber:
      if (v.is_null()) return v;
      if (!v.is_number()) throw bad();
      return v.get<double>();
    case Kind::NumberOrList:
      if (v.is_number()) return v.get<double>();
      [[fallthrough]];
    case Kind::NumberList: {
      if (!v.is_array() || v.empty()) throw bad();
      json out = json::array();
      for (const auto& e : v) {
        if (!e.is_number()) throw bad();
        out.push_back(e.get<double>());
      }
      return out;
    }
    case Kind::IntList: {
      if (!v.is_array()) throw bad();
      json out = json::array();
      for (const auto& e : v) {
        if (!is_int(e)) throw bad();
        out.push_back(static_cast<long long>(e.get<double>()));
      }
      return out;
    }
  }
  throw bad();
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline void check_count(const RunConfig& c, const char* key) {
  require(c.integer(key) >= 1, std::string("key '") + key + "' must be >= 1");
}

inline void check_range(const RunConfig& c, const std::string& axis) {
  check_count(c, (axis + "_count").c_str());
  require(c.num(axis + "_min") <= c.num(axis + "_max"), "key '" + axis + "_min' must not exceed '" + axis + "_max'");
}

inline void check_parities(const RunConfig& c) {
  const int L = c.integer("sites");
  const auto P = c.ints("parities");
  require(P.empty() || static_cast<int>(P.size()) == L, "key 'parities' needs one entry per site (" +
                                                            std::to_string(L) + ") or none for all even");
  for (int p : P) require(p == 1 || p == -1, "key 'parities': entries must be +1 or -1");
}

inline void check_lattice(const RunConfig& c) {
  const int L = c.integer("sites");
  if (c.str("lattice") == "dimer")
    require(L == 2, "key 'sites' must be 2 for lattice 'dimer'");
  else
    require(L >= 3, "key 'sites' must be >= 3 for lattice 'ring'");
}

inline void validate(const RunConfig& c) {
  const std::string& cmd = c.command;
  if (cmd == "phase-eq") {
    require(c.num("U") > 0.0, "key 'U' must be > 0");
    require(c.num("J1") >= 0.0 && c.num("J_min") >= 0.0, "keys 'J1' and 'J_min' must be >= 0");
    check_range(c, "mu");
    check_range(c, "J");
    const double half = c.num("U") / 2.0;
    require(c.num("J_max") < half, "key 'J_max' = " + json(c.num("J_max")).dump() +
                                       " leaves the stability domain J < U/2 (U/2 = " + json(half).dump() +
                                       "); the pair-hopping model is unbounded below there");
    require(c.integer("n_max") >= 0, "key 'n_max' must be >= 0 (0 selects it automatically)");
    require(c.num("J1") == 0.0 || c.str("sector") == "full", "key 'J1' > 0 requires sector 'full'");
  } else if (cmd == "phase-diss" || cmd == "semiclassical") {
    require(c.num("Gamma_p") > 0.0, "key 'Gamma_p' must be > 0");
    for (double g : c.numbers("Gamma_l")) require(g > 0.0, "key 'Gamma_l' must be > 0");
    require(c.num("Gamma_em0_ratio") >= 0.0, "key 'Gamma_em0_ratio' must be >= 0");
    require(c.num("J_min") >= 0.0, "key 'J_min' must be >= 0");
    check_range(c, "delta");
    check_range(c, "J");
    if (cmd == "phase-diss") {
      require(c.integer("n_max") == 0 || c.integer("n_max") >= 2, "key 'n_max' must be 0 (automatic) or >= 2");
      if (c.str("mode") == "trajectory") {
        require(c.integer("delta_count") == 1 && c.integer("J_count") == 1,
                "mode 'trajectory' runs one point: set delta_count and J_count to 1");
        require(c.num("t_final") > 0.0, "key 't_final' must be > 0");
        require(c.integer("samples") >= 3, "key 'samples' must be >= 3");
        require(c.num("window") > 0.0 && c.num("window") <= 1.0, "key 'window' must lie in (0, 1]");
        require(c.num("alpha_init") >= 0.0, "key 'alpha_init' must be >= 0 (0 selects it automatically)");
      }
    }
  } else if (cmd == "exact") {
    check_lattice(c);
    check_parities(c);
    require(c.integer("n_max") >= 0, "key 'n_max' must be >= 0 (0 selects it automatically)");
    require(c.num("U") > 0.0 && c.num("J") >= 0.0, "keys 'U' > 0 and 'J' >= 0 required");
    if (c.str("mode") != "verify") check_range(c, "J");
    require(c.integer("eigenvalues") >= 1, "key 'eigenvalues' must be >= 1");
  } else if (cmd == "circuit") {
    require(c.has("c2") == c.has("c3"), "keys 'c2' and 'c3' must be given together");
    require(c.has("E_c_aux") == c.has("E_J_aux"), "keys 'E_c_aux' and 'E_J_aux' must be given together");
    if (c.has("c2"))
      require(!c.given.count("alpha_c") && !c.given.count("phi_c"),
              "give either the junction description (alpha_c, phi_c) or the (c2, c3) override, not both");
    check_range(c, "delta");
    require(c.integer("z") >= 1, "key 'z' must be >= 1");
  } else if (cmd == "wigner") {
    check_lattice(c);
    check_parities(c);
    check_range(c, "re");
    check_range(c, "im");
    require(c.integer("n_max") >= 1 && c.integer("nodes") >= 2, "keys 'n_max' >= 1 and 'nodes' >= 2 required");
  } else if (cmd == "transport") {
    check_lattice(c);
    check_parities(c);
    check_range(c, "delta");
    require(c.num("Gamma_l") > 0.0 && c.num("G") >= 0.0, "keys 'Gamma_l' > 0 and 'G' >= 0 required");
  }
}

}  // namespace detail

// Parses a JSON object. `command` may come from the caller (the subcommand) or from the text;
// when both are present they must agree.
inline RunConfig parse_config(const std::string& text, const std::string& command = "") {
  json in;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    in = json::object();
  } else {
    try {
      in = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!in.is_object()) throw ConfigError("config must be a JSON object of key-value pairs");

  RunConfig c;
  c.command = command;
  if (in.contains("command")) {
    if (!in["command"].is_string()) throw ConfigError("key 'command' must be a string");
    const std::string named = in["command"].get<std::string>();
    if (!command.empty() && named != command)
      throw ConfigError("config names command '" + named + "' but '" + command + "' was invoked");
    c.command = named;
  }
  if (c.command.empty()) throw ConfigError("no command given; accepted values: " + join(commands()));
  const std::vector<KeySpec> keys = schema(c.command);

  for (const auto& s : keys) c.params[s.name] = s.fallback;
  for (auto it = in.begin(); it != in.end(); ++it) {
    const std::string& k = it.key();
    if (k == "command") continue;
    if (k == "out") {
      if (!it->is_string()) throw ConfigError("key 'out' must be a string path");
      c.out = it->get<std::string>();
      continue;
    }
    if (k == "workers") {
      if (!detail::is_int(*it) || it->get<double>() < 0) throw ConfigError("key 'workers' must be an integer >= 0");
      c.workers = static_cast<int>(it->get<double>());
      continue;
    }
    if (k == "seed") {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0))
        throw ConfigError("key 'seed' must be a non-negative integer");
      c.seed = it->get<std::uint64_t>();
      continue;
    }
    const KeySpec* spec = nullptr;
    for (const auto& s : keys)
      if (s.name == k) spec = &s;
    if (!spec) {
      std::vector<std::string> names = run_keys();
      for (const auto& s : keys) names.push_back(s.name);
      throw ConfigError("unknown key '" + k + "' for command '" + c.command + "'; accepted keys: " + join(names));
    }
    c.params[k] = detail::coerce(*spec, *it);
    c.given.insert(k);
  }
  detail::validate(c);
  return c;
}

}  // namespace pairhop::cli
