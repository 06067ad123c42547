#pragma once

// Closed-form sphere predictions for the large-population CSA-ES and the
// Monte-Carlo oracles used to check them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "csaes/core_es.hpp"
#include "csaes/rng.hpp"

namespace csaes {

/// Asymptotic progress coefficient c_theta = exp(-x^2/2) / (theta sqrt(2 pi)),
/// x = Phi^{-1}(1 - theta).
inline double progress_coefficient(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("progress_coefficient: theta must lie in (0,1)");
  const double x = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - theta);
  return std::exp(-0.5 * x * x) / (theta * std::sqrt(2.0 * std::numbers::pi));
}

/// Monte-Carlo estimate of c_{mu/mu,lambda}: the expected mean of the mu
/// largest of lambda standard normal variates.
inline double progress_coefficient_mc(int mu, int lambda, int repeats, Rng& rng) {
  if (mu < 1 || lambda < mu || repeats < 1) throw std::invalid_argument("progress_coefficient_mc: bad arguments");
  NormalSampler normal;
  std::vector<double> x(lambda);
  double acc = 0.0;
  for (int r = 0; r < repeats; ++r) {
    normal.fill(x, rng);
    std::nth_element(x.begin(), x.begin() + (lambda - mu), x.end());
    double top = 0.0;
    for (int i = lambda - mu; i < lambda; ++i) top += x[i];
    acc += top / mu;
  }
  return acc / repeats;
}

/// Finite-lambda coefficient with 1e5 repeats, cached per (mu, lambda).
inline double progress_coefficient_finite(int mu, int lambda) {
  static std::mutex lock;
  static std::map<std::pair<int, int>, double> cache;
  {
    std::lock_guard guard(lock);
    if (auto it = cache.find({mu, lambda}); it != cache.end()) return it->second;
  }
  Rng rng = make_stream(0x5eed'c0ef'f1c1'e47ULL, {static_cast<std::uint64_t>(mu), static_cast<std::uint64_t>(lambda)});
  const double value = progress_coefficient_mc(mu, lambda, 100000, rng);
  std::lock_guard guard(lock);
  cache.emplace(std::make_pair(mu, lambda), value);
  return value;
}

struct SphereParams {
  int dim = 100;
  int mu = 100;
  double theta = 0.5;
  double c_theta = 0.0;
  /// Coefficient used by the full progress rate; c_theta unless a finite-lambda value is supplied.
  double c_mulam = 0.0;

  static SphereParams asymptotic(int n, int mu, double theta = 0.5) {
    const double c = progress_coefficient(theta);
    return {n, mu, theta, c, c};
  }
  static SphereParams finite(int n, int mu, double theta = 0.5) {
    SphereParams p = asymptotic(n, mu, theta);
    p.c_mulam = progress_coefficient_finite(mu, lambda_for(mu, theta));
    return p;
  }
};

/// Normalized sphere progress rate for finite N and mu (without the
/// O(N^-1/2) terms).
inline double progress_rate_full(double sigma_star, const SphereParams& p) {
  const double N = p.dim;
  const double mu = p.mu;
  const double s2 = sigma_star * sigma_star;
  const double a = std::sqrt(1.0 + s2 / (mu * N));
  const double b = std::sqrt(1.0 + s2 / (2.0 * N));
  return p.c_mulam * sigma_star * (1.0 + s2 / (2.0 * mu * N)) / (a * b) - N * (a - 1.0);
}

/// sqrt(2N) c_theta - sigma*^2 / (2 mu).
inline double progress_rate_large_pop(double sigma_star, const SphereParams& p) {
  return std::sqrt(2.0 * p.dim) * p.c_theta - sigma_star * sigma_star / (2.0 * p.mu);
}

/// c sigma* - sigma*^2 / (2 mu); maximal at c mu, zero at 2 c mu.
inline double progress_rate_infinite_n(double sigma_star, int mu, double c_mulam) {
  return c_mulam * sigma_star - sigma_star * sigma_star / (2.0 * mu);
}

/// (8N)^{1/4} (c_theta mu)^{1/2}.
inline double second_zero_approx(int n, int mu, double c_theta) {
  return std::pow(8.0 * n, 0.25) * std::sqrt(c_theta * mu);
}

enum class ZeroMode { Approx, Numeric };

/// Maximizer of progress_rate_full on [0, hi] by golden-section search.
inline double progress_rate_maximizer(const SphereParams& p, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = progress_rate_full(c, p), fd = progress_rate_full(d, p);
  while (b - a > 1e-12 * hi) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - inv_phi * (b - a);
      fc = progress_rate_full(c, p);
    } else {
      a = c; c = d; fc = fd;
      d = a + inv_phi * (b - a);
      fd = progress_rate_full(d, p);
    }
  }
  return 0.5 * (a + b);
}

/// Second zero of the progress rate. Numeric mode bisects the full progress
/// rate on [argmax, 4 * approx] to a relative tolerance of 1e-10.
inline double second_zero(const SphereParams& p, ZeroMode mode) {
  const double approx = second_zero_approx(p.dim, p.mu, p.c_theta);
  if (mode == ZeroMode::Approx) return approx;

  const double hi_bound = 4.0 * approx;
  double lo = progress_rate_maximizer(p, hi_bound);
  double hi = hi_bound;
  double f_lo = progress_rate_full(lo, p);
  const double f_hi = progress_rate_full(hi, p);
  if (!(f_lo > 0.0 && f_hi < 0.0)) throw std::runtime_error("second_zero: progress rate does not change sign on the bracket");
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = progress_rate_full(mid, p);
    if (f_mid > 0.0) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct SteadyStatePrediction {
  double gamma = 0.0;
  double sigma_star_ss = 0.0;
  double phi_star = 0.0;
  double b = 0.0;
  /// False when gamma falls outside (1/sqrt(2), 1), where the gamma(b) relation is not valid.
  bool in_branch = true;
};

/// Steady-state ratio gamma from cumulation constant and RuleD-form damping
/// (use effective_damping() for the Han variant).
inline SteadyStatePrediction gamma_prediction(double c_sigma, double damping, int n, double c_theta, int mu) {
  SteadyStatePrediction out;
  out.b = 1.0 / (c_sigma * damping / (1.0 - c_sigma) + std::sqrt(2.0) * c_theta * damping / std::sqrt(static_cast<double>(n)));
  out.gamma = std::sqrt(0.5 * (std::sqrt(1.0 + out.b * out.b) - out.b + 1.0));
  out.in_branch = out.b > 0.0 && out.gamma > 1.0 / std::sqrt(2.0) && out.gamma < 1.0;
  out.sigma_star_ss = out.gamma * second_zero_approx(n, mu, c_theta);
  out.phi_star = c_theta * std::sqrt(2.0 * n) * (1.0 - out.gamma * out.gamma);
  return out;
}

inline SteadyStatePrediction gamma_prediction(const CsaConfig& cfg, int n, double c_theta, int mu) {
  return gamma_prediction(cfg.c_sigma, effective_damping(cfg), n, c_theta, mu);
}

/// Generations needed for a relative distance change r_ratio = R(g0)/R(g).
/// Does not depend on mu.
inline double generation_number(int n, double gamma, double c_theta, double r_ratio) {
  return std::sqrt(static_cast<double>(n)) * std::log(r_ratio) / (std::sqrt(2.0) * c_theta * (1.0 - gamma * gamma));
}

struct OracleEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Measured normalized progress N (R - R') / R of a single generation from
/// R = 1, sigma = sigma*/N, averaged over `trials` independent repeats.
inline OracleEstimate one_generation_oracle(double sigma_star, int n, int mu, int lambda, int trials, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("one_generation_oracle: trials must be >= 1");
  EsState st;
  st.y.assign(n, 0.0);
  st.y[0] = 1.0;
  st.s.assign(n, 0.0);
  st.sigma = sigma_star / n;
  st.mu = mu;
  st.lambda = lambda;
  auto sphere = [](std::span<const double> y, Rng&) {
    double acc = 0.0;
    for (double v : y) acc += v * v;
    return acc;
  };
  OffspringSet scratch;
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    Selection sel = sample_and_select(st, sphere, rng, scratch);
    const double phi = n * (1.0 - norm(sel.y_next));
    sum += phi;
    sum_sq += phi * phi;
  }
  OracleEstimate est;
  est.mean = sum / trials;
  if (trials > 1) {
    const double var = std::max(0.0, (sum_sq - trials * est.mean * est.mean) / (trials - 1));
    est.std_error = std::sqrt(var / trials);
  }
  return est;
}

struct PsaSteadyState {
  double pm_sq = 0.0;
  double pc_sq = 0.0;
};

/// Sphere steady-state of the simplified PSA paths at constant mu.
inline PsaSteadyState psa_steady_state_prediction(double beta, int mu, int n, double gamma, double c_theta) {
  const double g2 = gamma * gamma;
  const double k = std::sqrt(2.0 / n) * c_theta;
  PsaSteadyState out;
  out.pm_sq = 1.0 - (2.0 - 1.0 / g2) / (1.0 + beta / (k * (1.0 - beta)));
  out.pc_sq = (1.0 / beta - 0.5) * (8.0 * c_theta * c_theta * mu / n) * (1.0 - g2) * (1.0 - g2);
  return out;
}

enum class RescaleLaw { None, Sqrt, Linear };

inline std::string_view to_string(RescaleLaw law) {
  switch (law) {
    case RescaleLaw::None: return "none";
    case RescaleLaw::Sqrt: return "sqrt";
    case RescaleLaw::Linear: return "linear";
  }
  return "?";
}

/// sigma multiplier applied when mu changes from mu_old to mu_new.
inline double rescale_factor(int mu_old, int mu_new, RescaleLaw law) {
  if (mu_old < 1 || mu_new < 1) throw std::invalid_argument("rescale_factor: mu must be >= 1");
  const double ratio = static_cast<double>(mu_new) / mu_old;
  switch (law) {
    case RescaleLaw::None: return 1.0;
    case RescaleLaw::Sqrt: return std::sqrt(ratio);
    case RescaleLaw::Linear: return ratio;
  }
  return 1.0;
}

}  // namespace csaes
