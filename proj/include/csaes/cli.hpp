#pragma once

// Subcommand implementations behind the csaes command-line tool. Each one
// writes <output>.csv and <output>.json.

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csaes/config.hpp"
#include "csaes/experiments.hpp"
#include "csaes/output.hpp"
#include "csaes/theory.hpp"

namespace csaes {

inline constexpr const char* kToolVersion = "csaes 0.1.0";

/// Raised by a subcommand when a run violates the configured divergence policy.
class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  j["experiment"] = c.experiment;
  j["objective"] = std::string(to_string(c.objective));
  j["N"] = c.dim;
  j["A"] = c.amplitude;
  j["alpha"] = c.frequency;
  j["csa"] = std::string(to_string(c.csa));
  j["method"] = std::string(to_string(c.method));
  j["preset"] = c.preset;
  j["L"] = c.window;
  j["beta"] = c.beta;
  j["alpha_mu"] = c.alpha_mu;
  j["delta_g"] = c.delta_g;
  j["rescale"] = std::string(to_string(c.rescale));
  j["mu"] = c.mu;
  j["mu0"] = c.mu0;
  j["mu_min"] = c.mu_min;
  j["mu_max"] = c.mu_max;
  j["theta"] = c.theta;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["trace"] = c.trace;
  j["fail_on_diverged"] = c.fail_on_diverged;
  const TerminationSpec t = termination_for(c);
  j["f_stop"] = std::isfinite(t.f_stop) ? nlohmann::json(t.f_stop) : nlohmann::json(nullptr);
  j["sigma_stop"] = t.sigma_stop;
  j["g_max"] = t.g_max;
  j["eval_max"] = t.eval_max;
  j["sigma_star"] = c.sigma_stars;
  j["mu_list"] = c.mu_list;
  j["dims"] = c.dims;
  j["suite"] = c.suite;
  j["burn_in"] = c.burn_in;
  j["horizon"] = c.horizon;
  j["r_ratio"] = c.r_ratio;
  j["r0"] = c.r0;
  j["sigma"] = c.sigma;
  j["repeats"] = c.repeats;
  j["oracle_trials"] = c.oracle_trials;
  return j;
}

inline void write_summary(const RunConfig& c, const nlohmann::json& results) {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["seed"] = c.seed;
  j["config"] = config_json(c);
  j["results"] = results;
  std::ofstream out(c.output + ".json");
  if (!out) throw std::runtime_error("cannot open " + c.output + ".json for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + c.output + ".json");
}

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

// ---- subcommands ----

inline void cmd_progress_rate(const RunConfig& c, int workers) {
  struct Point {
    int mu;
    double sigma_star;
    OracleEstimate est;
  };
  std::vector<Point> points;
  for (int mu : c.mu_list)
    for (double s : c.sigma_stars) points.push_back({mu, s, {}});
  parallel_for(static_cast<int>(points.size()), workers, [&](int i) {
    auto& p = points[i];
    Rng rng = trial_stream(c.seed, "progress-rate/" + std::to_string(c.dim) + "/" + std::to_string(p.mu) + "/" +
                                       format_number(p.sigma_star), 0);
    p.est = one_generation_oracle(p.sigma_star, c.dim, p.mu, lambda_for(p.mu, c.theta), c.oracle_trials, rng);
  });
  CsvWriter csv(c.output + ".csv",
                {"N", "mu", "lambda", "sigma_star", "phi_oracle", "std_error", "phi_full", "phi_large_pop"});
  nlohmann::json res = nlohmann::json::array();
  for (const auto& p : points) {
    const SphereParams sp = SphereParams::asymptotic(c.dim, p.mu, c.theta);
    const double full = progress_rate_full(p.sigma_star, sp);
    const double large = progress_rate_large_pop(p.sigma_star, sp);
    csv.row({c.dim, p.mu, lambda_for(p.mu, c.theta), p.sigma_star, p.est.mean, p.est.std_error, full, large});
    res.push_back({{"mu", p.mu},
                   {"sigma_star", p.sigma_star},
                   {"within_2se", std::abs(p.est.mean - full) <= 2.0 * p.est.std_error}});
  }
  csv.close();
  nlohmann::json zeros = nlohmann::json::array();
  for (int mu : c.mu_list) {
    const SphereParams sp = SphereParams::asymptotic(c.dim, mu, c.theta);
    zeros.push_back({{"mu", mu},
                     {"second_zero_approx", second_zero(sp, ZeroMode::Approx)},
                     {"second_zero_numeric", second_zero(sp, ZeroMode::Numeric)}});
  }
  write_summary(c, {{"points", res}, {"second_zero", zeros}});
}

inline void cmd_gamma(const RunConfig& c, int workers) {
  SphereRunSpec spec;
  spec.csa = c.csa;
  spec.dim = c.dim;
  spec.mu = c.mu;
  spec.theta = c.theta;
  spec.burn_in = c.burn_in;
  if (c.is_set("g_max")) spec.g_max = c.g_max;
  const GammaResult g = measure_gamma(spec, c.trials, c.seed, workers);
  CsvWriter csv(c.output + ".csv", {"trial", "sigma_star_median", "gamma"});
  for (int t = 0; t < c.trials; ++t) {
    const auto& gt = g.trials[t];
    const double med = gt.diverged ? std::nan("") : gt.sigma_star_median;
    csv.row({t, med, med / g.second_zero});
  }
  csv.close();
  const double c_theta = progress_coefficient(c.theta);
  const auto pred = gamma_prediction(csa_params(c.csa, c.dim, c.mu), c.dim, c_theta, c.mu);
  if (c.fail_on_diverged && g.diverged > 0) throw PolicyError("diverged trials in gamma measurement");
  write_summary(c, {{"gamma_measured", number_or_null(g.gamma)},
                    {"sigma_star_mean", number_or_null(g.sigma_star_mean)},
                    {"second_zero_numeric", g.second_zero},
                    {"gamma_predicted", pred.gamma},
                    {"b", pred.b},
                    {"in_branch", pred.in_branch},
                    {"diverged", g.diverged}});
}

inline void cmd_gen_count(const RunConfig& c, int workers) {
  CsvWriter csv(c.output + ".csv", {"N", "mu", "trial", "generations", "finished"});
  nlohmann::json res = nlohmann::json::array();
  const double c_theta = progress_coefficient(c.theta);
  const long long g_max = c.is_set("g_max") ? c.g_max : 100000;
  for (int n : c.dims) {
    for (int mu : c.mu_list) {
      const GenCountResult r = measure_generation_count(c.csa, n, mu, c.r_ratio, c.trials, g_max, c.seed, workers);
      for (int t = 0; t < c.trials; ++t) csv.row({n, mu, t, r.generations[t], static_cast<int>(r.finished[t])});
      const double gamma = gamma_prediction(csa_params(c.csa, n, mu), n, c_theta, mu).gamma;
      res.push_back({{"N", n},
                     {"mu", mu},
                     {"mean_generations", number_or_null(r.mean_generations)},
                     {"unfinished", r.unfinished},
                     {"predicted_generations", generation_number(n, gamma, c_theta, 1.0 / c.r_ratio)}});
    }
  }
  csv.close();
  write_summary(c, res);
}

inline ScheduleSpec schedule_spec_for(const RunConfig& c) {
  ScheduleSpec s;
  s.csa = c.csa;
  s.law = c.rescale;
  s.dim = c.dim;
  s.alpha_mu = c.alpha_mu;
  s.delta_g = c.delta_g;
  s.mu0 = c.mu0;
  s.mu_max = c.mu_max;
  s.g_max = c.is_set("g_max") ? c.g_max : 50000;
  s.keep_trace = true;
  return s;
}

inline void cmd_schedule(const RunConfig& c, int) {
  const ScheduleSpec spec = schedule_spec_for(c);
  Rng rng = trial_stream(c.seed, "schedule", 0);
  const ScheduleResult r = run_schedule(spec, rng);
  CsvWriter csv(c.output + ".csv", {"g", "R", "mu", "sigma"});
  for (const auto& p : r.trace) csv.row({p.g, p.r, p.mu, p.sigma});
  csv.close();
  if (c.fail_on_diverged && r.verdict == ScheduleVerdict::Diverged) throw PolicyError("schedule run diverged");
  write_summary(c, {{"verdict", std::string(to_string(r.verdict))},
                    {"generations", r.generations},
                    {"final_R", r.final_r},
                    {"oscillations", r.oscillations},
                    {"diagnostic", r.diagnostic}});
}

inline void cmd_signals(const RunConfig& c, int workers) {
  std::vector<std::vector<SignalRow>> runs(c.mu_list.size());
  parallel_for(static_cast<int>(c.mu_list.size()), workers, [&](int i) {
    SignalSpec s;
    s.method = c.method;
    s.csa = c.csa;
    s.objective = objective_for(c, c.dim);
    s.mu = c.mu_list[i];
    s.horizon = c.horizon;
    s.window = c.window;
    s.beta = c.beta;
    Rng rng = trial_stream(c.seed, "signals/" + std::to_string(s.mu), 0);
    runs[i] = measure_signals_fixed_mu(s, rng);
  });
  CsvWriter csv(c.output + ".csv", {"mu", "g", "signal", "pm_sq", "pc_sq", "f_rec", "sigma"});
  nlohmann::json res = nlohmann::json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : runs[i]) {
      csv.row({c.mu_list[i], r.g, r.signal, r.pm_sq, r.pc_sq, r.f_rec, r.sigma});
      if (std::isfinite(r.signal)) sum += r.signal, ++count;
    }
    res.push_back({{"mu", c.mu_list[i]}, {"mean_signal", number_or_null(count ? sum / count : std::nan(""))}});
  }
  csv.close();
  write_summary(c, res);
}

inline TrialConfig trial_config_for(const RunConfig& c, const ObjectiveSpec& obj) {
  TrialConfig t;
  t.objective = obj;
  t.csa = c.csa;
  t.pcs = pcs_settings_for(c, obj.dim);
  t.mu0 = c.mu0;
  t.term = termination_for(c);
  t.r0 = c.r0;
  t.keep_trace = c.trace;
  return t;
}

inline void write_trace_rows(CsvWriter& csv, const std::string& id, int trial, const TrialRecord& rec) {
  for (const auto& tr : rec.trace)
    csv.row({id, trial, tr.g, tr.f_rec, tr.f_med, tr.sigma, tr.mu, tr.per, tr.signal});
}

inline void cmd_pcs_table(const RunConfig& c, int workers) {
  std::vector<BenchmarkConfig> suite;
  for (int n : c.dims) {
    const std::string id = std::string(to_string(c.objective)) + std::to_string(n) + "/" +
                           std::string(to_string(c.method)) + "/" + std::string(to_string(c.csa)) + "/" + c.preset;
    suite.push_back({id, std::string(to_string(c.method)), trial_config_for(c, objective_for(c, n))});
  }
  const auto results = run_benchmark(suite, c.trials, c.seed, workers);
  CsvWriter csv(c.output + ".csv", {"objective", "N", "trial", "outcome", "mu_p25", "mu_med", "mu_p75", "F_t"});
  nlohmann::json res = nlohmann::json::array();
  int diverged = 0;
  for (const auto& r : results) {
    std::vector<double> p25, med, p75, ft;
    for (int t = 0; t < r.trials; ++t) {
      const auto& rec = r.records[t];
      csv.row({std::string(to_string(c.objective)), r.dim, t, std::string(to_string(rec.outcome)), rec.mu_p25,
               rec.mu_med, rec.mu_p75, rec.evals});
      p25.push_back(rec.mu_p25);
      med.push_back(rec.mu_med);
      p75.push_back(rec.mu_p75);
      ft.push_back(static_cast<double>(rec.evals));
      diverged += rec.outcome == Outcome::Diverged;
    }
    res.push_back({{"id", r.id},
                   {"N", r.dim},
                   {"mu_p25_median", median_of(p25)},
                   {"mu_med_median", median_of(med)},
                   {"mu_p75_median", median_of(p75)},
                   {"F_t_median", median_of(ft)}});
  }
  csv.close();
  if (c.trace) {
    CsvWriter tr(c.output + "_trace.csv", {"config", "trial", "g", "f_rec", "f_med", "sigma", "mu", "per", "signal"});
    for (const auto& r : results)
      for (int t = 0; t < r.trials; ++t) write_trace_rows(tr, r.id, t, r.records[t]);
    tr.close();
  }
  if (c.fail_on_diverged && diverged > 0) throw PolicyError("diverged trials in pcs-table");
  write_summary(c, res);
}

inline void cmd_benchmark(const RunConfig& c, int workers) {
  std::vector<LadderPoint> grid;
  if (c.suite == "rastrigin-ladder")
    grid = rastrigin_ladder();
  else if (c.suite == "rastrigin-dims")
    grid = rastrigin_dim_sweep(c.amplitude);
  else
    for (int n : c.dims) grid.push_back({n, c.amplitude});
  const std::string label = c.method == PcsMethod::None ? "fixed" : std::string(to_string(c.method));
  std::vector<BenchmarkConfig> suite;
  for (const auto& p : grid) {
    const ObjectiveSpec obj = ObjectiveSpec::rastrigin(p.dim, p.amplitude, c.frequency);
    const std::string id = "rastrigin/" + std::to_string(p.dim) + "/" + format_number(p.amplitude) + "/" + label + "/" +
                           std::string(to_string(c.csa)) + "/" + c.preset;
    TrialConfig t = trial_config_for(c, obj);
    t.term = termination_for(c);
    suite.push_back({id, label, t});
  }
  const auto results = run_benchmark(suite, c.trials, c.seed, workers);
  CsvWriter csv(c.output + ".csv", {"N", "A", "method", "P_S", "E_r"});
  nlohmann::json res = nlohmann::json::array();
  int diverged = 0;
  for (const auto& r : results) {
    csv.row({r.dim, r.amplitude, r.method_label, r.p_success, r.e_runtime});
    for (const auto& rec : r.records) diverged += rec.outcome == Outcome::Diverged;
    res.push_back({{"id", r.id},
                   {"N", r.dim},
                   {"A", r.amplitude},
                   {"trials", r.trials},
                   {"successes", r.successes},
                   {"F_success_total", r.f_success_total},
                   {"F_fail_total", r.f_fail_total},
                   {"mu_med_median", r.mu_med}});
  }
  csv.close();
  if (c.trace) {
    CsvWriter tr(c.output + "_trace.csv", {"config", "trial", "g", "f_rec", "f_med", "sigma", "mu", "per", "signal"});
    for (const auto& r : results)
      for (int t = 0; t < r.trials; ++t) write_trace_rows(tr, r.id, t, r.records[t]);
    tr.close();
  }
  if (c.fail_on_diverged && diverged > 0) throw PolicyError("diverged trials in benchmark");
  write_summary(c, res);
}

inline void cmd_psa_steady(const RunConfig& c, int workers) {
  struct Job {
    int mu;
    int trial;
    PsaSteadyMeasurement m;
  };
  std::vector<Job> jobs;
  for (int mu : c.mu_list)
    for (int t = 0; t < c.trials; ++t) jobs.push_back({mu, t, {}});
  parallel_for(static_cast<int>(jobs.size()), workers, [&](int i) {
    SphereRunSpec spec;
    spec.csa = c.csa;
    spec.dim = c.dim;
    spec.mu = jobs[i].mu;
    spec.theta = c.theta;
    spec.burn_in = c.burn_in;
    spec.r_ratio_stop = 1e-12;
    if (c.is_set("g_max")) spec.g_max = c.g_max;
    Rng rng = trial_stream(c.seed, "psa-steady/" + std::to_string(c.dim) + "/" + std::to_string(jobs[i].mu), jobs[i].trial);
    jobs[i].m = measure_psa_steady_state(spec, c.beta, rng);
  });
  const double c_theta = progress_coefficient(c.theta);
  CsvWriter csv(c.output + ".csv", {"mu", "trial", "pm_sq", "pc_sq", "gamma", "pm_sq_pred", "pc_sq_pred"});
  for (const auto& j : jobs) {
    const auto pred = psa_steady_state_prediction(c.beta, j.mu, c.dim, j.m.gamma, c_theta);
    csv.row({j.mu, j.trial, j.m.pm_sq, j.m.pc_sq, j.m.gamma, pred.pm_sq, pred.pc_sq});
  }
  csv.close();
  write_summary(c, {{"runs", static_cast<int>(jobs.size())}});
}

inline void cmd_median_shift(const RunConfig& c, int) {
  Rng rng = trial_stream(c.seed, "median-shift", 0);
  const MedianShift m =
      median_shift_oracle(c.dim, c.mu, lambda_for(c.mu, c.theta), c.r0, c.sigma, c.alpha_mu, c.repeats, rng);
  CsvWriter csv(c.output + ".csv", {"median_before", "median_after_rescaled", "median_after_unrescaled"});
  csv.row({m.before, m.after_rescaled, m.after_unrescaled});
  csv.close();
  write_summary(c, {{"median_before", m.before},
                    {"median_after_rescaled", m.after_rescaled},
                    {"median_after_unrescaled", m.after_unrescaled}});
}

inline const std::map<std::string, std::function<void(const RunConfig&, int)>>& subcommands() {
  static const std::map<std::string, std::function<void(const RunConfig&, int)>> table{
      {"progress-rate", cmd_progress_rate}, {"gamma", cmd_gamma},           {"gen-count", cmd_gen_count},
      {"schedule", cmd_schedule},           {"signals", cmd_signals},       {"pcs-table", cmd_pcs_table},
      {"benchmark", cmd_benchmark},         {"psa-steady", cmd_psa_steady}, {"median-shift", cmd_median_shift}};
  return table;
}

/// Runs a subcommand. Returns 0 on success, 2 on runtime failure.
inline int run_command(const std::string& name, const RunConfig& c, int workers, std::ostream& err) {
  const auto& table = subcommands();
  auto it = table.find(name);
  if (it == table.end()) {
    err << "unknown subcommand '" << name << "'\n";
    return 1;
  }
  if (c.method == PcsMethod::None && name == "signals") {
    err << "signals needs method = apop, pccsa or psa\n";
    return 1;
  }
  try {
    it->second(c, workers);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace csaes
