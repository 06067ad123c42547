#pragma once

// Experiment protocols: fixed-mu sphere measurements, the mu schedule, PCS
// trials and benchmarks, and the two-generation median-shift oracle.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "csaes/core_es.hpp"
#include "csaes/pcs.hpp"
#include "csaes/rng.hpp"
#include "csaes/testbed.hpp"
#include "csaes/theory.hpp"

namespace csaes {

// ---- parallel trials ----

/// Worker count from CSAES_WORKERS, else the hardware concurrency.
inline int default_workers() {
  if (const char* env = std::getenv("CSAES_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Calls fn(i) for i in [0, count) on up to `workers` threads. The first
/// exception thrown by any call is rethrown after all threads joined.
template <class Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_lock;
  auto loop = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard guard(error_lock);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) pool.emplace_back(loop);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median_of(std::vector<double> values) { return percentile(std::move(values), 50.0); }

// ---- parameter sets ----

struct ParamSet {
  std::string name = "custom";
  int window = 10;
  double beta = 0.1;
  double alpha_mu = 2.0;
  int delta_g = 10;
  RescaleLaw rescale_law = RescaleLaw::Sqrt;

  static ParamSet p1(int n) {
    const double rn = std::sqrt(static_cast<double>(n));
    return {"P1", static_cast<int>(std::ceil(rn)), 1.0 / rn, 1.05, 0, RescaleLaw::Sqrt};
  }
  static ParamSet p2() { return {"P2", 10, 0.1, 2.0, 10, RescaleLaw::Sqrt}; }
};

inline PcsSettings pcs_settings(PcsMethod method, const ParamSet& ps, int mu_min, int mu_max, double theta = 0.5) {
  PcsSettings s;
  s.method = method;
  s.mu_min = mu_min;
  s.mu_max = mu_max;
  s.alpha_mu = ps.alpha_mu;
  s.delta_g = ps.delta_g;
  s.rescale_law = ps.rescale_law;
  s.theta = theta;
  s.window = ps.window;
  s.beta = ps.beta;
  return s;
}

// ---- PCS trials ----

struct TrialConfig {
  ObjectiveSpec objective = ObjectiveSpec::sphere(10);
  CsaVariant csa = CsaVariant::SqrtN;
  PcsSettings pcs;
  int mu0 = 4;
  TerminationSpec term;
  double r0 = 1.0;
  bool keep_trace = false;
};

struct TraceRow {
  long long g = 0;
  double f_rec = 0.0;
  double f_med = 0.0;
  double sigma = 0.0;
  int mu = 0;
  int per = 0;
  double signal = 0.0;
};

struct TrialRecord {
  Outcome outcome = Outcome::Running;
  long long evals = 0;
  long long generations = 0;
  double mu_p25 = 0.0;
  double mu_med = 0.0;
  double mu_p75 = 0.0;
  double final_f = 0.0;
  double final_sigma = 0.0;
  std::string diagnostic;
  std::vector<TraceRow> trace;
};

/// One run of the full loop: a CSA-ES generation, the performance measure,
/// termination check, then the wait-gated mu change. Percentiles are taken
/// over the mu used in each completed generation.
inline TrialRecord run_pcs_trial(const TrialConfig& cfg, Rng& rng) {
  const int n = cfg.objective.dim;
  EsState state = init_run(cfg.objective, cfg.mu0, cfg.pcs.theta, cfg.r0);
  CsaConfig csa = csa_params(cfg.csa, n, state.mu);
  PcsController ctrl = make_controller(cfg.pcs, n);
  Objective objective(cfg.objective);
  OffspringSet scratch;

  TrialRecord rec;
  std::vector<double> mu_seq;
  while (true) {
    const int mu_used = state.mu;
    GenerationOutput out;
    try {
      out = run_generation(state, csa, objective, rng, scratch);
    } catch (const DivergenceError& e) {
      rec.outcome = Outcome::Diverged;
      rec.diagnostic = e.what();
      break;
    }
    mu_seq.push_back(mu_used);
    const Measurement m = measure_performance(ctrl, out, mu_used, n);
    if (cfg.keep_trace)
      rec.trace.push_back({state.g, out.f_rec, out.f_med, state.sigma, mu_used, static_cast<int>(m.per), m.signal});
    rec.final_f = out.f_rec;

    const Outcome o = classify_termination(state, out.f_rec, cfg.term, objective.evaluations());
    if (o != Outcome::Running) {
      rec.outcome = o;
      break;
    }
    try {
      apply_population_change(ctrl, m.per, state, csa);
    } catch (const DivergenceError& e) {
      rec.outcome = Outcome::Diverged;
      rec.diagnostic = e.what();
      break;
    }
  }
  rec.evals = objective.evaluations();
  rec.generations = state.g;
  rec.final_sigma = state.sigma;
  if (!mu_seq.empty()) {
    rec.mu_p25 = percentile(mu_seq, 25.0);
    rec.mu_med = percentile(mu_seq, 50.0);
    rec.mu_p75 = percentile(mu_seq, 75.0);
  }
  return rec;
}

inline Rng trial_stream(std::uint64_t master, std::string_view config_id, int trial) {
  return make_stream(master, {stable_hash(config_id), static_cast<std::uint64_t>(trial)});
}

inline std::vector<TrialRecord> run_trials(const TrialConfig& cfg, std::string_view config_id, int trials,
                                           std::uint64_t master, int workers) {
  std::vector<TrialRecord> out(trials);
  parallel_for(trials, workers, [&](int t) {
    Rng rng = trial_stream(master, config_id, t);
    out[t] = run_pcs_trial(cfg, rng);
  });
  return out;
}

// ---- benchmark ----

struct BenchmarkConfig {
  std::string id;
  std::string method_label;
  TrialConfig trial;
};

struct BenchmarkResult {
  std::string id;
  std::string method_label;
  int dim = 0;
  double amplitude = 0.0;
  int trials = 0;
  int successes = 0;
  double p_success = 0.0;
  /// Absent when no trial succeeded.
  std::optional<double> e_runtime;
  long long f_success_total = 0;
  long long f_fail_total = 0;
  double mu_med = 0.0;
  std::vector<TrialRecord> records;
};

/// E_r = (F_s + F_u) / P_S with per-trial means F_s, F_u, which equals the
/// total evaluation count divided by the number of successes.
inline BenchmarkResult aggregate(const BenchmarkConfig& bc, std::vector<TrialRecord> records) {
  BenchmarkResult r;
  r.id = bc.id;
  r.method_label = bc.method_label;
  r.dim = bc.trial.objective.dim;
  r.amplitude = bc.trial.objective.amplitude;
  r.trials = static_cast<int>(records.size());
  std::vector<double> mu_meds;
  for (const auto& t : records) {
    if (t.outcome == Outcome::Success) {
      ++r.successes;
      r.f_success_total += t.evals;
    } else {
      r.f_fail_total += t.evals;
    }
    mu_meds.push_back(t.mu_med);
  }
  r.p_success = r.trials > 0 ? static_cast<double>(r.successes) / r.trials : 0.0;
  if (r.successes > 0) r.e_runtime = static_cast<double>(r.f_success_total + r.f_fail_total) / r.successes;
  if (!mu_meds.empty()) r.mu_med = median_of(mu_meds);
  r.records = std::move(records);
  return r;
}

inline std::vector<BenchmarkResult> run_benchmark(const std::vector<BenchmarkConfig>& suite, int trials,
                                                  std::uint64_t master, int workers) {
  // Flatten (config, trial) pairs so that small suites still use every worker.
  const int total = static_cast<int>(suite.size()) * trials;
  std::vector<TrialRecord> flat(total);
  parallel_for(total, workers, [&](int k) {
    const auto& bc = suite[k / trials];
    const int t = k % trials;
    Rng rng = trial_stream(master, bc.id, t);
    flat[k] = run_pcs_trial(bc.trial, rng);
  });
  std::vector<BenchmarkResult> out;
  for (std::size_t c = 0; c < suite.size(); ++c) {
    std::vector<TrialRecord> recs(flat.begin() + c * trials, flat.begin() + (c + 1) * trials);
    out.push_back(aggregate(suite[c], std::move(recs)));
  }
  return out;
}

struct LadderPoint {
  int dim;
  double amplitude;
};

/// (N, A) pairs chosen for a roughly constant success rate of the fixed-mu ES.
inline std::vector<LadderPoint> rastrigin_ladder() { return {{10, 65}, {30, 33}, {100, 12}, {300, 7}, {1000, 3}}; }

inline std::vector<LadderPoint> rastrigin_dim_sweep(double amplitude = 3.0) {
  return {{10, amplitude}, {30, amplitude}, {100, amplitude}, {300, amplitude}, {1000, amplitude}};
}

// ---- fixed-mu sphere measurements ----

struct GammaTrial {
  double sigma_star_median = 0.0;
  long long generations = 0;
  bool diverged = false;
};

struct GammaResult {
  double gamma = 0.0;
  double sigma_star_mean = 0.0;
  double second_zero = 0.0;
  std::vector<GammaTrial> trials;
  int diverged = 0;
};

struct SphereRunSpec {
  CsaVariant csa = CsaVariant::SqrtN;
  int dim = 100;
  int mu = 100;
  double theta = 0.5;
  double burn_in = 0.2;
  double r_ratio_stop = 1e-8;
  long long g_max = 20000;
};

/// Fixed-mu sphere run; per generation it calls visit(state, out, R).
template <class Visit>
long long run_fixed_mu_sphere(const SphereRunSpec& spec, Rng& rng, Visit&& visit) {
  EsState st = init_run(ObjectiveSpec::sphere(spec.dim), spec.mu, spec.theta, 1.0);
  CsaConfig cfg = csa_params(spec.csa, spec.dim, spec.mu);
  auto sphere = [](std::span<const double> y, Rng&) { return sphere_value(y); };
  OffspringSet scratch;
  const double r0 = norm(st.y);
  while (st.g < spec.g_max) {
    GenerationOutput out = run_generation(st, cfg, sphere, rng, scratch);
    const double r = std::sqrt(out.f_rec);
    visit(st, out, r);
    if (r <= spec.r_ratio_stop * r0) break;
  }
  return st.g;
}

/// Per-trial median of sigma* = sigma N / R after discarding the burn-in
/// fraction, averaged over trials and normalized by the numeric second zero.
inline GammaResult measure_gamma(const SphereRunSpec& spec, int trials, std::uint64_t master, int workers) {
  GammaResult res;
  res.trials.resize(trials);
  const std::string id = "gamma/" + std::string(to_string(spec.csa)) + "/" + std::to_string(spec.dim) + "/" +
                         std::to_string(spec.mu);
  parallel_for(trials, workers, [&](int t) {
    Rng rng = trial_stream(master, id, t);
    std::vector<double> sigma_star;
    GammaTrial gt;
    try {
      gt.generations = run_fixed_mu_sphere(spec, rng, [&](const EsState& st, const GenerationOutput&, double r) {
        sigma_star.push_back(st.sigma * spec.dim / r);
      });
      const auto skip = static_cast<std::size_t>(spec.burn_in * static_cast<double>(sigma_star.size()));
      gt.sigma_star_median = median_of({sigma_star.begin() + skip, sigma_star.end()});
    } catch (const DivergenceError&) {
      gt.diverged = true;
    }
    res.trials[t] = gt;
  });
  double sum = 0.0;
  int used = 0;
  for (const auto& gt : res.trials) {
    if (gt.diverged) {
      ++res.diverged;
      continue;
    }
    sum += gt.sigma_star_median;
    ++used;
  }
  res.second_zero = second_zero(SphereParams::asymptotic(spec.dim, spec.mu, spec.theta), ZeroMode::Numeric);
  res.sigma_star_mean = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
  res.gamma = res.sigma_star_mean / res.second_zero;
  return res;
}

struct GenCountResult {
  double mean_generations = 0.0;
  std::vector<long long> generations;
  std::vector<char> finished;
  int unfinished = 0;
};

/// Generations until R falls to r_ratio * R(0), averaged over trials. Runs
/// that hit g_max are counted as unfinished and excluded from the mean.
inline GenCountResult measure_generation_count(CsaVariant csa, int n, int mu, double r_ratio, int trials,
                                               long long g_max, std::uint64_t master, int workers) {
  SphereRunSpec spec;
  spec.csa = csa;
  spec.dim = n;
  spec.mu = mu;
  spec.r_ratio_stop = r_ratio;
  spec.g_max = g_max;
  GenCountResult res;
  res.generations.assign(trials, 0);
  res.finished.assign(trials, 0);
  auto& finished = res.finished;
  const std::string id = "gen-count/" + std::string(to_string(csa)) + "/" + std::to_string(n) + "/" + std::to_string(mu);
  parallel_for(trials, workers, [&](int t) {
    Rng rng = trial_stream(master, id, t);
    double last_r = 1.0;
    try {
      res.generations[t] = run_fixed_mu_sphere(spec, rng, [&](const EsState&, const GenerationOutput&, double r) { last_r = r; });
      finished[t] = last_r <= r_ratio;
    } catch (const DivergenceError&) {
      finished[t] = 0;
    }
  });
  double sum = 0.0;
  int used = 0;
  for (int t = 0; t < trials; ++t) {
    if (!finished[t]) {
      ++res.unfinished;
      continue;
    }
    sum += static_cast<double>(res.generations[t]);
    ++used;
  }
  res.mean_generations = used > 0 ? sum / used : std::numeric_limits<double>::quiet_NaN();
  return res;
}

// ---- mu schedule ----

enum class ScheduleVerdict { Converged, Diverged, Budget };

inline std::string_view to_string(ScheduleVerdict v) {
  switch (v) {
    case ScheduleVerdict::Converged: return "converged";
    case ScheduleVerdict::Diverged: return "diverged";
    case ScheduleVerdict::Budget: return "budget";
  }
  return "?";
}

struct ScheduleSpec {
  CsaVariant csa = CsaVariant::SqrtN;
  RescaleLaw law = RescaleLaw::Sqrt;
  int dim = 10;
  double alpha_mu = 2.0;
  int delta_g = 0;
  int mu0 = 4;
  int mu_max = 1024;
  int hold = 200;
  double r_stop = 1e-12;
  /// R above r_diverge * R(0) counts as divergence.
  double r_diverge = 1e8;
  long long g_max = 50000;
  bool keep_trace = false;
};

struct ScheduleTracePoint {
  long long g;
  double r;
  int mu;
  double sigma;
};

struct ScheduleResult {
  ScheduleVerdict verdict = ScheduleVerdict::Budget;
  long long generations = 0;
  double final_r = 0.0;
  int oscillations = 0;
  std::string diagnostic;
  std::vector<ScheduleTracePoint> trace;
};

/// mu is held at mu0 for `hold` generations, then driven up by alpha_mu to
/// mu_max and back down to mu0, repeatedly, through the regular wait-gated
/// population change with the chosen sigma rescaling.
inline ScheduleResult run_schedule(const ScheduleSpec& spec, Rng& rng) {
  if (!(spec.alpha_mu > 1.0)) throw std::invalid_argument("alpha_mu must exceed 1");
  const int n = spec.dim;
  EsState st = init_run(ObjectiveSpec::sphere(n), spec.mu0, 0.5, 1.0);
  CsaConfig cfg = csa_params(spec.csa, n, st.mu);
  PcsSettings ps;
  ps.mu_min = spec.mu0;
  ps.mu_max = spec.mu_max;
  ps.alpha_mu = spec.alpha_mu;
  ps.delta_g = spec.delta_g;
  ps.rescale_law = spec.law;
  PcsController ctrl = make_controller(ps, n);
  ctrl.w = 0;

  auto sphere = [](std::span<const double> y, Rng&) { return sphere_value(y); };
  OffspringSet scratch;
  const double r0 = norm(st.y);
  bool rising = true;
  ScheduleResult res;
  try {
    while (st.g < spec.g_max) {
      GenerationOutput out = run_generation(st, cfg, sphere, rng, scratch);
      const double r = std::sqrt(out.f_rec);
      res.final_r = r;
      if (spec.keep_trace) res.trace.push_back({st.g, r, st.mu, st.sigma});
      if (r < spec.r_stop * r0) {
        res.verdict = ScheduleVerdict::Converged;
        break;
      }
      if (r > spec.r_diverge * r0) {
        res.verdict = ScheduleVerdict::Diverged;
        res.diagnostic = "R exceeded the divergence bound";
        break;
      }
      if (st.g < spec.hold) continue;
      if (rising && st.mu >= spec.mu_max) rising = false;
      if (!rising && st.mu <= spec.mu0) {
        rising = true;
        ++res.oscillations;
      }
      apply_population_change(ctrl, rising ? Performance::Bad : Performance::Good, st, cfg);
    }
  } catch (const DivergenceError& e) {
    res.verdict = ScheduleVerdict::Diverged;
    res.diagnostic = e.what();
  }
  res.generations = st.g;
  return res;
}

// ---- fixed-mu PCS signals ----

struct SignalRow {
  long long g = 0;
  double signal = 0.0;  // P_f, P_H or |p_theta|^2; NaN while filling
  double pm_sq = 0.0;
  double pc_sq = 0.0;
  double f_rec = 0.0;
  double sigma = 0.0;
};

struct SignalSpec {
  PcsMethod method = PcsMethod::Apop;
  CsaVariant csa = CsaVariant::SqrtN;
  ObjectiveSpec objective = ObjectiveSpec::random(100);
  int mu = 100;
  long long horizon = 1000;
  int window = 10;
  double beta = 0.1;
  /// Sphere runs stop once R drops below this fraction of R(0).
  double r_ratio_stop = 1e-12;
};

/// Runs at constant mu with the measure attached but the population change
/// disabled.
inline std::vector<SignalRow> measure_signals_fixed_mu(const SignalSpec& spec, Rng& rng) {
  if (spec.method == PcsMethod::None) throw std::invalid_argument("signals need a PCS method");
  const int n = spec.objective.dim;
  EsState st = init_run(spec.objective, spec.mu, 0.5, 1.0);
  CsaConfig cfg = csa_params(spec.csa, n, spec.mu);
  PcsSettings ps;
  ps.method = spec.method;
  ps.window = spec.window;
  ps.beta = spec.beta;
  ps.mu_min = 1;
  ps.mu_max = std::max(1, spec.mu);
  PcsController ctrl = make_controller(ps, n);
  Objective objective(spec.objective);
  OffspringSet scratch;
  const double f0 = sphere_value(st.y);

  std::vector<SignalRow> rows;
  while (st.g < spec.horizon) {
    GenerationOutput out = run_generation(st, cfg, objective, rng, scratch);
    const Measurement m = measure_performance(ctrl, out, spec.mu, n);
    rows.push_back({st.g, m.signal, ctrl.psa.pm_sq(), ctrl.psa.pc_sq(), out.f_rec, st.sigma});
    if (spec.objective.kind == ObjectiveKind::Sphere && out.f_rec < spec.r_ratio_stop * spec.r_ratio_stop * f0) break;
  }
  return rows;
}

struct PsaSteadyMeasurement {
  double pm_sq = 0.0;
  double pc_sq = 0.0;
  double gamma = 0.0;
  long long generations = 0;
};

/// Time averages of the PSA path norms and the steady-state gamma on the
/// sphere at constant mu, after discarding the burn-in fraction.
inline PsaSteadyMeasurement measure_psa_steady_state(const SphereRunSpec& spec, double beta, Rng& rng) {
  PsaState psa = make_psa(spec.dim, beta);
  std::vector<double> pm, pc, sigma_star;
  const long long g = run_fixed_mu_sphere(spec, rng, [&](const EsState& st, const GenerationOutput& out, double r) {
    psa_update(psa, out.z_rec, out.sigma_ratio, spec.mu, spec.dim);
    pm.push_back(psa.pm_sq());
    pc.push_back(psa.pc_sq());
    sigma_star.push_back(st.sigma * spec.dim / r);
  });
  const auto skip = static_cast<std::size_t>(spec.burn_in * static_cast<double>(pm.size()));
  auto mean_tail = [skip](const std::vector<double>& v) {
    double acc = 0.0;
    for (std::size_t i = skip; i < v.size(); ++i) acc += v[i];
    return acc / static_cast<double>(v.size() - skip);
  };
  PsaSteadyMeasurement m;
  m.pm_sq = mean_tail(pm);
  m.pc_sq = mean_tail(pc);
  m.gamma = median_of({sigma_star.begin() + skip, sigma_star.end()}) /
            second_zero(SphereParams::asymptotic(spec.dim, spec.mu, spec.theta), ZeroMode::Numeric);
  m.generations = g;
  return m;
}

// ---- median shift ----

struct MedianShift {
  double before = 0.0;
  double after_rescaled = 0.0;
  double after_unrescaled = 0.0;
};

/// Two generations on the sphere: the parent at distance R with mutation
/// strength sigma, then at 0.98 R with sigma * sqrt(alpha_mu) and with sigma
/// unchanged. Each entry is the median of all selected offspring fitness
/// values pooled over the repeats.
inline MedianShift median_shift_oracle(int n, int mu, int lambda, double r, double sigma, double alpha_mu, int repeats,
                                       Rng& rng) {
  if (repeats < 1) throw std::invalid_argument("median_shift_oracle: repeats must be >= 1");
  auto sphere = [](std::span<const double> y, Rng&) { return sphere_value(y); };
  auto pooled = [&](double radius, double s) {
    EsState st;
    st.y.assign(n, 0.0);
    st.y[0] = radius;
    st.s.assign(n, 0.0);
    st.sigma = s;
    st.mu = mu;
    st.lambda = lambda;
    OffspringSet off;
    std::vector<double> selected;
    selected.reserve(static_cast<std::size_t>(repeats) * mu);
    for (int k = 0; k < repeats; ++k) {
      sample_and_select(st, sphere, rng, off);
      for (int m = 0; m < mu; ++m) selected.push_back(off.ranked_fitness(m));
    }
    std::sort(selected.begin(), selected.end());
    return sorted_median(selected);
  };
  MedianShift out;
  out.before = pooled(r, sigma);
  // Both variants of the second generation see the same random numbers.
  const Rng fork = rng;
  out.after_rescaled = pooled(0.98 * r, sigma * std::sqrt(alpha_mu));
  rng = fork;
  out.after_unrescaled = pooled(0.98 * r, sigma);
  return out;
}

}  // namespace csaes
