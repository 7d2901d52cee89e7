#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polyrad/io.hpp"

namespace polyrad {

/// Parameters of one CLI run. Unset optionals take command-specific defaults.
struct RunConfig {
  std::string command;
  std::optional<int> dim;
  int order = 1;
  std::optional<double> beta;
  double alpha = 0.0;
  /// Full init vector (overrides alpha/beta, required for order > 1 integrations).
  std::vector<double> init;
  std::optional<double> p;
  double rtol = 1e-10;
  double atol = 1e-12;
  std::optional<double> r_max;
  double u_max = 40.0;
  double u_min = 1e-8;
  double h_min = 1e-13;
  std::size_t max_steps = 10'000'000;
  double tol_beta = 1e-8;
  std::vector<double> betas;
  std::vector<std::vector<double>> lattices;
  std::vector<double> p_values;
  std::vector<double> a_grid;
  std::vector<double> b_grid;
  /// Absent: full default suite. Present and empty: nothing to run.
  std::optional<std::vector<std::string>> checks;
  std::string out = "out";
  bool force = false;
  /// Reserved; every computation is deterministic.
  std::optional<std::uint64_t> seed;

  IntegrationControls controls(double default_r_max) const {
    IntegrationControls c;
    c.rtol = rtol;
    c.atol = atol;
    c.r_max = r_max.value_or(default_r_max);
    c.u_max = u_max;
    c.u_min = u_min;
    c.h_min = h_min;
    c.max_steps = max_steps;
    return c;
  }

  int require_dim() const {
    if (!dim) throw Error(ErrorKind::Config, "missing required field 'dim' (--dim)");
    if (*dim < 1) throw Error(ErrorKind::Config, "field 'dim' must be >= 1");
    return *dim;
  }
};

namespace io {

inline json to_json(const RunConfig& c) {
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  json lattices = json::array();
  for (const auto& l : c.lattices) lattices.push_back(num_list(l));
  return json{{"command", c.command},
              {"dim", opt(c.dim)},
              {"order", c.order},
              {"beta", c.beta ? num(*c.beta) : json(nullptr)},
              {"alpha", num(c.alpha)},
              {"init", num_list(c.init)},
              {"p", c.p ? num(*c.p) : json(nullptr)},
              {"rtol", num(c.rtol)},
              {"atol", num(c.atol)},
              {"rmax", c.r_max ? num(*c.r_max) : json(nullptr)},
              {"u_max", num(c.u_max)},
              {"u_min", num(c.u_min)},
              {"h_min", num(c.h_min)},
              {"max_steps", c.max_steps},
              {"tol_beta", num(c.tol_beta)},
              {"betas", num_list(c.betas)},
              {"lattices", lattices},
              {"p_values", num_list(c.p_values)},
              {"a_grid", num_list(c.a_grid)},
              {"b_grid", num_list(c.b_grid)},
              {"checks", opt(c.checks)},
              {"out", c.out},
              {"force", c.force},
              {"seed", opt(c.seed)}};
}

namespace detail {

template <class T>
T get_field(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::Config, "field '" + key + "' has the wrong type: " + v.dump());
  }
}

inline double get_number(const json& v, const std::string& key) {
  try {
    return to_double(v);
  } catch (const Error&) {
    throw Error(ErrorKind::Config, "field '" + key + "' must be a number: " + v.dump());
  }
}

inline std::vector<double> get_numbers(const json& v, const std::string& key) {
  if (!v.is_array()) throw Error(ErrorKind::Config, "field '" + key + "' must be an array");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(get_number(x, key));
  return out;
}

}  // namespace detail

/// Overwrites the fields present in `j`. Unknown keys are rejected.
inline void apply_json(RunConfig& c, const json& j) {
  using detail::get_field;
  using detail::get_number;
  using detail::get_numbers;
  if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "command") c.command = get_field<std::string>(v, key);
    else if (key == "dim") c.dim = v.is_null() ? std::nullopt : std::optional<int>(get_field<int>(v, key));
    else if (key == "order") c.order = get_field<int>(v, key);
    else if (key == "beta") c.beta = v.is_null() ? std::nullopt : std::optional<double>(get_number(v, key));
    else if (key == "alpha") c.alpha = get_number(v, key);
    else if (key == "init") c.init = get_numbers(v, key);
    else if (key == "p") c.p = v.is_null() ? std::nullopt : std::optional<double>(get_number(v, key));
    else if (key == "rtol") c.rtol = get_number(v, key);
    else if (key == "atol") c.atol = get_number(v, key);
    else if (key == "rmax") c.r_max = v.is_null() ? std::nullopt : std::optional<double>(get_number(v, key));
    else if (key == "u_max") c.u_max = get_number(v, key);
    else if (key == "u_min") c.u_min = get_number(v, key);
    else if (key == "h_min") c.h_min = get_number(v, key);
    else if (key == "max_steps") c.max_steps = get_field<std::size_t>(v, key);
    else if (key == "tol_beta") c.tol_beta = get_number(v, key);
    else if (key == "betas") c.betas = get_numbers(v, key);
    else if (key == "lattices") {
      if (!v.is_array()) throw Error(ErrorKind::Config, "field 'lattices' must be an array");
      c.lattices.clear();
      for (const auto& l : v) c.lattices.push_back(get_numbers(l, key));
    }
    else if (key == "p_values") c.p_values = get_numbers(v, key);
    else if (key == "a_grid") c.a_grid = get_numbers(v, key);
    else if (key == "b_grid") c.b_grid = get_numbers(v, key);
    else if (key == "checks") {
      c.checks = v.is_null() ? std::nullopt
                             : std::optional<std::vector<std::string>>(get_field<std::vector<std::string>>(v, key));
    }
    else if (key == "out") c.out = get_field<std::string>(v, key);
    else if (key == "force") c.force = get_field<bool>(v, key);
    else if (key == "seed") c.seed = v.is_null() ? std::nullopt : std::optional<std::uint64_t>(get_field<std::uint64_t>(v, key));
    else throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
  }
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  apply_json(c, j);
  return c;
}

inline RunConfig read_config(const std::filesystem::path& path, RunConfig base = {}) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  apply_json(base, j);
  return base;
}

}  // namespace io
}  // namespace polyrad
