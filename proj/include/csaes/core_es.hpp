#pragma once

// The (mu/mu_I, lambda)-CSA-ES generation step.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "csaes/rng.hpp"

namespace csaes {

enum class CsaVariant { SqrtN, LinN, Han };
enum class UpdateRule { RuleD, RuleCsDs };

inline std::string_view to_string(CsaVariant v) {
  switch (v) {
    case CsaVariant::SqrtN: return "sqrtN";
    case CsaVariant::LinN: return "linN";
    case CsaVariant::Han: return "han";
  }
  return "?";
}

/// Thrown when a trial leaves the numerically meaningful range (sigma
/// outside [1e-300, 1e300], non-finite fitness or state). Experiments catch
/// it and record the trial as diverged.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSigmaFloor = 1e-300;
inline constexpr double kSigmaCeil = 1e300;

/// sqrt(N) * (1 - 1/(4N) + 1/(21 N^2)), used for every N.
inline double expected_chi_norm(int n) {
  if (n < 1) throw std::invalid_argument("expected_chi_norm: N must be >= 1");
  const double N = n;
  return std::sqrt(N) * (1.0 - 1.0 / (4.0 * N) + 1.0 / (21.0 * N * N));
}

struct CsaConfig {
  CsaVariant variant = CsaVariant::SqrtN;
  UpdateRule rule = UpdateRule::RuleD;
  double c_sigma = 1.0;
  /// D for RuleD, d_sigma for RuleCsDs.
  double damping = 1.0;
  double e_chi = 1.0;
};

/// Cumulation constant and damping of a CSA variant. Han depends on mu and
/// has to be recomputed after every population change.
inline CsaConfig csa_params(CsaVariant variant, int n, int mu) {
  if (n < 1 || mu < 1) throw std::invalid_argument("csa_params: N and mu must be >= 1");
  const double N = n;
  const double m = mu;
  CsaConfig cfg;
  cfg.variant = variant;
  cfg.e_chi = expected_chi_norm(n);
  switch (variant) {
    case CsaVariant::SqrtN:
      cfg.rule = UpdateRule::RuleD;
      cfg.c_sigma = 1.0 / std::sqrt(N);
      cfg.damping = 1.0 / cfg.c_sigma;
      break;
    case CsaVariant::LinN:
      cfg.rule = UpdateRule::RuleD;
      cfg.c_sigma = 1.0 / N;
      cfg.damping = 1.0 / cfg.c_sigma;
      break;
    case CsaVariant::Han:
      cfg.rule = UpdateRule::RuleCsDs;
      cfg.c_sigma = (m + 2.0) / (N + m + 5.0);
      cfg.damping = 1.0 + cfg.c_sigma + 2.0 * std::max(0.0, std::sqrt((m - 1.0) / (N + 1.0)) - 1.0);
      break;
  }
  return cfg;
}

/// Damping expressed in the RuleD form exp((|s|/E_chi - 1)/D).
inline double effective_damping(const CsaConfig& cfg) {
  return cfg.rule == UpdateRule::RuleD ? cfg.damping : cfg.damping / cfg.c_sigma;
}

/// lambda = round(mu / theta).
inline int lambda_for(int mu, double theta) {
  return static_cast<int>(std::lround(static_cast<double>(mu) / theta));
}

struct EsState {
  std::vector<double> y;
  std::vector<double> s;
  double sigma = 1.0;
  int mu = 1;
  int lambda = 2;
  long long g = 0;

  int dim() const { return static_cast<int>(y.size()); }
};

/// lambda offspring of one generation. z is stored row-major (lambda x N).
/// The offspring positions are y + sigma * z and are not materialized.
struct OffspringSet {
  int dim = 0;
  std::vector<double> z;
  std::vector<double> f;
  std::vector<int> order;

  int size() const { return static_cast<int>(f.size()); }
  std::span<const double> direction(int l) const {
    return {z.data() + static_cast<std::size_t>(l) * dim, static_cast<std::size_t>(dim)};
  }
  /// Fitness of the rank-th best offspring (0-based).
  double ranked_fitness(int rank) const { return f[order[rank]]; }
};

struct Selection {
  std::vector<double> z_rec;
  std::vector<double> y_next;
  double f_med = 0.0;
};

struct GenerationOutput {
  std::vector<double> z_rec;
  double f_rec = 0.0;
  double f_med = 0.0;
  double sigma_ratio = 1.0;
};

/// Anything that maps a search point to a fitness value, optionally
/// consuming randomness (the random objective does).
template <class F>
concept FitnessFunction = requires(F& f, std::span<const double> y, Rng& rng) {
  { f(y, rng) } -> std::convertible_to<double>;
};

/// Median of an ascending range; even counts average the two central values.
inline double sorted_median(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("median of empty range");
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

/// Samples lambda offspring into `off` (buffers are reused), sorts them by
/// fitness with ties broken by offspring index, and recombines the mu best.
template <FitnessFunction F>
Selection sample_and_select(const EsState& state, F& objective, Rng& rng, OffspringSet& off) {
  const int n = state.dim();
  const int lambda = state.lambda;
  const int mu = state.mu;
  if (mu < 1 || lambda < mu) throw std::invalid_argument("sample_and_select: need 1 <= mu <= lambda");

  off.dim = n;
  off.z.resize(static_cast<std::size_t>(lambda) * n);
  off.f.resize(lambda);
  off.order.resize(lambda);

  NormalSampler normal;
  std::vector<double> candidate(n);
  for (int l = 0; l < lambda; ++l) {
    double* zl = off.z.data() + static_cast<std::size_t>(l) * n;
    for (int i = 0; i < n; ++i) {
      zl[i] = normal(rng);
      candidate[i] = state.y[i] + state.sigma * zl[i];
    }
    const double fl = objective(std::span<const double>(candidate), rng);
    if (!std::isfinite(fl)) throw DivergenceError("non-finite fitness value at generation " + std::to_string(state.g));
    off.f[l] = fl;
  }

  std::iota(off.order.begin(), off.order.end(), 0);
  std::sort(off.order.begin(), off.order.end(), [&](int a, int b) {
    return off.f[a] < off.f[b] || (off.f[a] == off.f[b] && a < b);
  });

  Selection sel;
  sel.z_rec.assign(n, 0.0);
  std::vector<double> selected_f(mu);
  for (int m = 0; m < mu; ++m) {
    const int idx = off.order[m];
    const double* zl = off.z.data() + static_cast<std::size_t>(idx) * n;
    for (int i = 0; i < n; ++i) sel.z_rec[i] += zl[i];
    selected_f[m] = off.f[idx];
  }
  for (double& v : sel.z_rec) v /= mu;

  sel.y_next.resize(n);
  for (int i = 0; i < n; ++i) sel.y_next[i] = state.y[i] + state.sigma * sel.z_rec[i];
  sel.f_med = sorted_median(selected_f);
  return sel;
}

template <FitnessFunction F>
Selection sample_and_select(const EsState& state, F& objective, Rng& rng) {
  OffspringSet off;
  return sample_and_select(state, objective, rng, off);
}

/// s' = (1 - c_sigma) s + sqrt(mu c_sigma (2 - c_sigma)) z_rec, with mu the
/// population size of the generation that produced z_rec.
inline std::vector<double> update_path(std::span<const double> s, std::span<const double> z_rec,
                                       double c_sigma, int mu) {
  if (s.size() != z_rec.size()) throw std::invalid_argument("update_path: length mismatch");
  const double decay = 1.0 - c_sigma;
  const double gain = std::sqrt(mu * c_sigma * (2.0 - c_sigma));
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = decay * s[i] + gain * z_rec[i];
  return out;
}

inline double norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double squared_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

inline double update_sigma(double sigma, std::span<const double> s_new, const CsaConfig& cfg) {
  const double deviation = norm(s_new) / cfg.e_chi - 1.0;
  const double exponent =
      cfg.rule == UpdateRule::RuleD ? deviation / cfg.damping : cfg.c_sigma / cfg.damping * deviation;
  const double next = sigma * std::exp(exponent);
  if (!std::isfinite(next) || next <= 0.0) throw DivergenceError("sigma update overflowed");
  return next;
}

inline void check_guard_rails(const EsState& state) {
  if (!(state.sigma >= kSigmaFloor && state.sigma <= kSigmaCeil))
    throw DivergenceError("sigma left [1e-300, 1e300] at generation " + std::to_string(state.g));
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(state.y.begin(), state.y.end(), finite) || !std::all_of(state.s.begin(), state.s.end(), finite))
    throw DivergenceError("non-finite state at generation " + std::to_string(state.g));
}

/// One full generation: sampling, selection, recombination, path and sigma
/// update, then f_rec = f(y^(g+1)). The objective is called lambda + 1 times.
template <FitnessFunction F>
GenerationOutput run_generation(EsState& state, const CsaConfig& cfg, F& objective, Rng& rng, OffspringSet& scratch) {
  Selection sel = sample_and_select(state, objective, rng, scratch);

  std::vector<double> s_next = update_path(state.s, sel.z_rec, cfg.c_sigma, state.mu);
  const double sigma_next = update_sigma(state.sigma, s_next, cfg);

  GenerationOutput out;
  out.sigma_ratio = sigma_next / state.sigma;
  out.f_med = sel.f_med;

  state.y = std::move(sel.y_next);
  state.s = std::move(s_next);
  state.sigma = sigma_next;
  state.g += 1;
  check_guard_rails(state);

  out.f_rec = objective(std::span<const double>(state.y), rng);
  if (!std::isfinite(out.f_rec)) throw DivergenceError("non-finite recombinant fitness");
  out.z_rec = std::move(sel.z_rec);
  return out;
}

template <FitnessFunction F>
GenerationOutput run_generation(EsState& state, const CsaConfig& cfg, F& objective, Rng& rng) {
  OffspringSet scratch;
  return run_generation(state, cfg, objective, rng, scratch);
}

}  // namespace csaes
