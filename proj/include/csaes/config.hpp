#pragma once

// Flat key = value run configuration with preset expansion and validation.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "csaes/experiments.hpp"

namespace csaes {

/// Carries every violation found while building a RunConfig.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid configuration:";
    for (const auto& s : p) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

struct RunConfig {
  std::string experiment;

  ObjectiveKind objective = ObjectiveKind::Sphere;
  int dim = 100;
  double amplitude = 3.0;
  double frequency = 2.0 * std::numbers::pi;

  CsaVariant csa = CsaVariant::SqrtN;
  PcsMethod method = PcsMethod::None;
  std::string preset = "P2";
  int window = 10;
  double beta = 0.1;
  double alpha_mu = 2.0;
  int delta_g = 10;
  RescaleLaw rescale = RescaleLaw::Sqrt;

  int mu = 100;
  int mu0 = 4;
  int mu_min = 4;
  int mu_max = 1024;
  double theta = 0.5;

  int trials = 10;
  std::uint64_t seed = 1;
  std::string output = "out";
  bool trace = false;
  bool fail_on_diverged = false;

  double f_stop = 1e-3;
  double sigma_stop = 1e-3;
  long long g_max = 100000;
  long long eval_max = 100000000;

  std::vector<double> sigma_stars{10, 20, 30, 40};
  std::vector<int> mu_list{100};
  std::vector<int> dims{100};
  std::string suite = "single";
  double burn_in = 0.2;
  long long horizon = 1000;
  double r_ratio = 1e-6;
  double r0 = 1.0;
  double sigma = 0.42;
  int repeats = 10000;
  int oracle_trials = 10000;

  /// Keys given explicitly (file or flags); preset values never override these.
  std::set<std::string> explicit_keys;

  bool is_set(const std::string& key) const { return explicit_keys.count(key) > 0; }
};

/// Every accepted key, in documentation order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "experiment", "objective", "N", "A", "alpha", "csa", "method", "preset", "L", "beta", "alpha_mu",
      "delta_g", "rescale", "mu", "mu0", "mu_min", "mu_max", "theta", "trials", "seed", "output", "trace",
      "fail_on_diverged", "f_stop", "sigma_stop", "g_max", "eval_max", "sigma_star", "mu_list", "dims",
      "suite", "burn_in", "horizon", "r_ratio", "r0", "sigma", "repeats", "oracle_trials"};
  return keys;
}

/// Splits `key = value` lines. Blank lines and text after '#' are ignored.
inline ConfigEntries parse_entries(const std::string& text) {
  ConfigEntries out;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (!problems.empty()) throw ConfigError(problems);
  return out;
}

namespace detail {

template <class T>
bool parse_scalar(const std::string& text, T& out) {
  if constexpr (std::is_same_v<T, double>) {
    try {
      std::size_t used = 0;
      out = std::stod(text, &used);
      return used == text.size();
    } catch (...) {
      return false;
    }
  } else {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
  }
}

template <class T>
bool parse_list(const std::string& text, std::vector<T>& out) {
  std::vector<T> values;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) return false;
    T v{};
    if (!parse_scalar(item.substr(b, e - b + 1), v)) return false;
    values.push_back(v);
  }
  if (values.empty()) return false;
  out = std::move(values);
  return true;
}

}  // namespace detail

inline RunConfig resolve_config(const ConfigEntries& entries) {
  RunConfig c;
  std::vector<std::string> problems;
  std::map<std::string, std::string> values;
  const auto& known = config_keys();
  for (const auto& [k, v] : entries) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      problems.push_back("unknown key '" + k + "'");
      continue;
    }
    values[k] = v;  // later entries (flags) win
    c.explicit_keys.insert(k);
  }

  auto bad = [&](const std::string& key, const std::string& why) {
    problems.push_back(key + " = '" + values[key] + "': " + why);
  };
  auto num = [&](const char* key, auto& field) {
    auto it = values.find(key);
    if (it == values.end()) return;
    if (!detail::parse_scalar(it->second, field)) bad(key, "not a valid number");
  };
  auto list = [&](const char* key, auto& field) {
    auto it = values.find(key);
    if (it == values.end()) return;
    if (!detail::parse_list(it->second, field)) bad(key, "expected a comma-separated list of numbers");
  };
  auto word = [&](const char* key, auto& field, std::initializer_list<std::pair<const char*, std::decay_t<decltype(field)>>> options) {
    auto it = values.find(key);
    if (it == values.end()) return;
    for (const auto& [name, val] : options)
      if (it->second == name) {
        field = val;
        return;
      }
    std::string allowed;
    for (const auto& [name, val] : options) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    bad(key, "expected one of: " + allowed);
  };

  if (auto it = values.find("experiment"); it != values.end()) c.experiment = it->second;
  word("objective", c.objective,
       {{"sphere", ObjectiveKind::Sphere}, {"random", ObjectiveKind::Random}, {"rastrigin", ObjectiveKind::Rastrigin}});
  num("N", c.dim);
  num("A", c.amplitude);
  num("alpha", c.frequency);
  word("csa", c.csa, {{"sqrtN", CsaVariant::SqrtN}, {"linN", CsaVariant::LinN}, {"han", CsaVariant::Han}});
  word("method", c.method,
       {{"none", PcsMethod::None}, {"apop", PcsMethod::Apop}, {"pccsa", PcsMethod::PcCsa}, {"psa", PcsMethod::Psa}});
  if (auto it = values.find("preset"); it != values.end()) {
    if (it->second == "P1" || it->second == "P2" || it->second == "custom")
      c.preset = it->second;
    else
      bad("preset", "expected one of: P1, P2, custom");
  }
  num("L", c.window);
  num("beta", c.beta);
  num("alpha_mu", c.alpha_mu);
  num("delta_g", c.delta_g);
  word("rescale", c.rescale, {{"none", RescaleLaw::None}, {"sqrt", RescaleLaw::Sqrt}, {"linear", RescaleLaw::Linear}});
  num("mu", c.mu);
  num("mu0", c.mu0);
  num("mu_min", c.mu_min);
  num("mu_max", c.mu_max);
  num("theta", c.theta);
  num("trials", c.trials);
  num("seed", c.seed);
  if (auto it = values.find("output"); it != values.end()) c.output = it->second;
  word("trace", c.trace, {{"0", false}, {"1", true}, {"false", false}, {"true", true}});
  word("fail_on_diverged", c.fail_on_diverged, {{"0", false}, {"1", true}, {"false", false}, {"true", true}});
  num("f_stop", c.f_stop);
  num("sigma_stop", c.sigma_stop);
  num("g_max", c.g_max);
  num("eval_max", c.eval_max);
  list("sigma_star", c.sigma_stars);
  list("mu_list", c.mu_list);
  list("dims", c.dims);
  if (auto it = values.find("suite"); it != values.end()) {
    if (it->second == "single" || it->second == "rastrigin-ladder" || it->second == "rastrigin-dims")
      c.suite = it->second;
    else
      bad("suite", "expected one of: single, rastrigin-ladder, rastrigin-dims");
  }
  num("burn_in", c.burn_in);
  num("horizon", c.horizon);
  num("r_ratio", c.r_ratio);
  num("r0", c.r0);
  num("sigma", c.sigma);
  num("repeats", c.repeats);
  num("oracle_trials", c.oracle_trials);

  // Preset expansion; explicitly given values stay.
  if (c.preset != "custom" && c.dim >= 1) {
    const ParamSet ps = c.preset == "P1" ? ParamSet::p1(c.dim) : ParamSet::p2();
    if (!c.is_set("L")) c.window = ps.window;
    if (!c.is_set("beta")) c.beta = ps.beta;
    if (!c.is_set("alpha_mu")) c.alpha_mu = ps.alpha_mu;
    if (!c.is_set("delta_g")) c.delta_g = ps.delta_g;
    if (!c.is_set("rescale")) c.rescale = ps.rescale_law;
  }

  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  require(c.dim >= 1, "N must be >= 1");
  require(!(c.alpha_mu <= 1.0), "alpha_mu must exceed 1");
  require(c.window >= 2, "L must be >= 2");
  require(!(c.method == PcsMethod::PcCsa && c.window < 3), "pccsa needs L >= 3");
  require(c.beta > 0.0 && c.beta <= 1.0, "beta must lie in (0, 1]");
  require(c.delta_g >= 0, "delta_g must be >= 0");
  require(c.theta > 0.0 && c.theta < 1.0, "theta must lie in (0, 1)");
  require(c.mu >= 1, "mu must be >= 1");
  require(c.mu_min >= 1 && c.mu_min <= c.mu_max, "need 1 <= mu_min <= mu_max");
  require(c.mu0 >= c.mu_min && c.mu0 <= c.mu_max, "mu0 must lie in [mu_min, mu_max]");
  require(c.trials >= 1, "trials must be >= 1");
  require(c.g_max >= 1 && c.eval_max >= 1, "g_max and eval_max must be >= 1");
  require(c.objective != ObjectiveKind::Rastrigin || (c.amplitude > 0.0 && c.frequency > 0.0),
          "rastrigin needs A > 0 and alpha > 0");
  require(c.burn_in >= 0.0 && c.burn_in < 1.0, "burn_in must lie in [0, 1)");
  require(c.horizon >= 1, "horizon must be >= 1");
  require(c.r_ratio > 0.0 && c.r_ratio < 1.0, "r_ratio must lie in (0, 1)");
  require(c.r0 > 0.0, "r0 must be positive");
  require(c.sigma > 0.0, "sigma must be positive");
  require(c.repeats >= 1 && c.oracle_trials >= 1, "repeats and oracle_trials must be >= 1");
  for (double s : c.sigma_stars) require(s >= 0.0, "sigma_star values must be >= 0");
  for (int m : c.mu_list) require(m >= 1, "mu_list values must be >= 1");
  for (int d : c.dims) require(d >= 1, "dims values must be >= 1");

  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

inline RunConfig parse_config(const std::string& text) { return resolve_config(parse_entries(text)); }

/// Termination for PCS runs. Unless set explicitly: the random function
/// only has a 1000-generation budget, the sphere stops at R < 1e-12 from
/// R0 = 1, Rastrigin uses f < 1e-3 and sigma < 1e-3.
inline TerminationSpec termination_for(const RunConfig& c) {
  TerminationSpec t;
  switch (c.objective) {
    case ObjectiveKind::Random:
      t = TerminationSpec::budget_only(1000);
      break;
    case ObjectiveKind::Sphere:
      t.f_stop = 1e-24 * c.r0 * c.r0;
      t.sigma_stop = 0.0;
      break;
    case ObjectiveKind::Rastrigin:
      break;
  }
  if (c.is_set("f_stop")) t.f_stop = c.f_stop;
  if (c.is_set("sigma_stop")) t.sigma_stop = c.sigma_stop;
  if (c.is_set("g_max")) t.g_max = c.g_max;
  if (c.is_set("eval_max")) t.eval_max = c.eval_max;
  return t;
}

inline ObjectiveSpec objective_for(const RunConfig& c, int dim) {
  switch (c.objective) {
    case ObjectiveKind::Sphere: return ObjectiveSpec::sphere(dim);
    case ObjectiveKind::Random: return ObjectiveSpec::random(dim);
    case ObjectiveKind::Rastrigin: return ObjectiveSpec::rastrigin(dim, c.amplitude, c.frequency);
  }
  return ObjectiveSpec::sphere(dim);
}

/// Controller settings for dimension `dim`; the P1 rules depend on N.
inline PcsSettings pcs_settings_for(const RunConfig& c, int dim) {
  PcsSettings s;
  s.method = c.method;
  s.mu_min = c.mu_min;
  s.mu_max = c.mu_max;
  s.alpha_mu = c.alpha_mu;
  s.delta_g = c.delta_g;
  s.rescale_law = c.rescale;
  s.theta = c.theta;
  s.window = c.window;
  s.beta = c.beta;
  if (c.preset == "P1") {
    const ParamSet p1 = ParamSet::p1(dim);
    if (!c.is_set("L")) s.window = std::max(p1.window, c.method == PcsMethod::PcCsa ? 3 : 2);
    if (!c.is_set("beta")) s.beta = p1.beta;
  }
  return s;
}

}  // namespace csaes
