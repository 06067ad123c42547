#pragma once

// Population control: the APOP, pcCSA and PSA performance measures and the
// shared mu-change step with sigma rescaling.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "csaes/core_es.hpp"
#include "csaes/student_t.hpp"
#include "csaes/theory.hpp"

namespace csaes {

enum class Performance : int { Bad = -1, Neutral = 0, Good = 1 };
enum class PcsMethod { None, Apop, PcCsa, Psa };

inline std::string_view to_string(PcsMethod m) {
  switch (m) {
    case PcsMethod::None: return "none";
    case PcsMethod::Apop: return "apop";
    case PcsMethod::PcCsa: return "pccsa";
    case PcsMethod::Psa: return "psa";
  }
  return "?";
}

/// Three-way comparison used by every measure: below the threshold maps to
/// `below`, above to its negation, equality to Neutral.
inline Performance compare_threshold(double value, double threshold, Performance below) {
  if (value < threshold) return below;
  if (value > threshold) return below == Performance::Good ? Performance::Bad : Performance::Good;
  return Performance::Neutral;
}

/// Sliding window of the last `length` values.
class Window {
 public:
  explicit Window(int length = 1) : length_(length) {
    if (length < 1) throw std::invalid_argument("window length must be >= 1");
  }
  void push(double v) {
    values_.push_back(v);
    if (static_cast<int>(values_.size()) > length_) values_.pop_front();
  }
  bool full() const { return static_cast<int>(values_.size()) == length_; }
  int length() const { return length_; }
  std::vector<double> values() const { return {values_.begin(), values_.end()}; }

 private:
  int length_;
  std::deque<double> values_;
};

// ---- APOP ----

struct ApopState {
  Window f_med_history{10};
  double theta_f = 0.2;
};

/// Fraction of the L-1 consecutive differences that are deteriorations.
inline double apop_ratio(std::span<const double> f_med) {
  if (f_med.size() < 2) throw std::invalid_argument("apop_ratio: need at least two medians");
  int up = 0;
  for (std::size_t i = 1; i < f_med.size(); ++i)
    if (f_med[i] - f_med[i - 1] > 0.0) ++up;
  return static_cast<double>(up) / static_cast<double>(f_med.size() - 1);
}

inline Performance apop_performance(const ApopState& st, double* ratio = nullptr) {
  if (!st.f_med_history.full()) return Performance::Neutral;
  const double pf = apop_ratio(st.f_med_history.values());
  if (ratio) *ratio = pf;
  return compare_threshold(pf, st.theta_f, Performance::Good);
}

// ---- pcCSA ----

struct PcCsaState {
  Window f_rec_history{10};
  double theta_h = 0.05;
};

struct SlopeTest {
  double slope = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  double p_value = 0.5;
};

/// Least-squares slope of f against 0..L-1 and the one-sided p-value
/// P(T_{L-2} <= a/s_a). The standard error comes from the regression
/// residuals. A residual-free fit gives p = 0, 1 or 0.5 by the sign of the slope.
inline SlopeTest pccsa_test(std::span<const double> f) {
  const int L = static_cast<int>(f.size());
  if (L < 3) throw std::invalid_argument("pccsa_test: need at least 3 values");
  const double g_bar = 0.5 * (L - 1);
  double f_bar = 0.0;
  for (double v : f) f_bar += v;
  f_bar /= L;

  double sgg = 0.0, sgf = 0.0, sff = 0.0;
  for (int i = 0; i < L; ++i) {
    const double dg = i - g_bar;
    const double df = f[i] - f_bar;
    sgg += dg * dg;
    sgf += dg * df;
    sff += df * df;
  }
  SlopeTest out;
  out.slope = sgf / sgg;
  out.intercept = f_bar - out.slope * g_bar;

  double rss = 0.0;
  for (int i = 0; i < L; ++i) {
    const double r = f[i] - out.slope * i - out.intercept;
    rss += r * r;
  }
  // Rounding leaves residuals of order eps * |f| on an exact line.
  if (rss <= 1e-24 * sff) {
    out.std_error = 0.0;
    out.p_value = out.slope < 0.0 ? 0.0 : (out.slope > 0.0 ? 1.0 : 0.5);
    return out;
  }
  out.std_error = std::sqrt(rss / ((L - 2) * sgg));
  out.p_value = student_t_cdf(out.slope / out.std_error, L - 2);
  return out;
}

inline double pccsa_pvalue(std::span<const double> f) { return pccsa_test(f).p_value; }

inline Performance pccsa_performance(const PcCsaState& st, double* p_value = nullptr) {
  if (!st.f_rec_history.full()) return Performance::Neutral;
  const double p = pccsa_pvalue(st.f_rec_history.values());
  if (p_value) *p_value = p;
  return compare_threshold(p, st.theta_h, Performance::Good);
}

// ---- PSA ----

struct PsaState {
  double beta = 0.1;
  double theta_theta = 1.4;
  std::vector<double> p_m;
  std::vector<double> p_c;

  double pm_sq() const { return squared_norm(p_m); }
  double pc_sq() const { return squared_norm(p_c); }
  double p_theta_sq() const { return pm_sq() + pc_sq(); }
};

inline PsaState make_psa(int n, double beta, double theta_theta = 1.4) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("PSA beta must lie in (0,1]");
  return {beta, theta_theta, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
}

/// Both paths use E_F = N / mu with mu the population size that produced z_rec.
inline void psa_update(PsaState& st, std::span<const double> z_rec, double sigma_ratio, int mu, int n) {
  if (static_cast<int>(z_rec.size()) != n || static_cast<int>(st.p_m.size()) != n)
    throw std::invalid_argument("psa_update: dimension mismatch");
  const double beta = st.beta;
  const double gain = std::sqrt(beta * (2.0 - beta) * mu / n);
  const double delta_c = (sigma_ratio * sigma_ratio - 1.0) / std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    st.p_m[i] = (1.0 - beta) * st.p_m[i] + gain * z_rec[i];
    st.p_c[i] = (1.0 - beta) * st.p_c[i] + gain * delta_c;
  }
}

inline Performance psa_performance(const PsaState& st) {
  return compare_threshold(st.p_theta_sq(), st.theta_theta, Performance::Bad);
}

// ---- controller ----

struct PcsController {
  PcsMethod method = PcsMethod::None;
  int mu_min = 4;
  int mu_max = 1024;
  double alpha_mu = 2.0;
  int delta_g = 0;
  int w = 0;
  RescaleLaw rescale_law = RescaleLaw::Sqrt;
  double theta = 0.5;

  ApopState apop;
  PcCsaState pccsa;
  PsaState psa;
};

struct PcsSettings {
  PcsMethod method = PcsMethod::None;
  int mu_min = 4;
  int mu_max = 1024;
  double alpha_mu = 2.0;
  int delta_g = 0;
  RescaleLaw rescale_law = RescaleLaw::Sqrt;
  double theta = 0.5;
  int window = 10;
  double beta = 0.1;
  double theta_f = 0.2;
  double theta_h = 0.05;
  double theta_theta = 1.4;
};

inline PcsController make_controller(const PcsSettings& s, int n) {
  if (!(s.alpha_mu > 1.0)) throw std::invalid_argument("alpha_mu must exceed 1");
  if (s.mu_min < 1 || s.mu_max < s.mu_min) throw std::invalid_argument("need 1 <= mu_min <= mu_max");
  if (s.delta_g < 0) throw std::invalid_argument("delta_g must be >= 0");
  if (s.method == PcsMethod::PcCsa && s.window < 3) throw std::invalid_argument("pcCSA needs L >= 3");
  if (s.method == PcsMethod::Apop && s.window < 2) throw std::invalid_argument("APOP needs L >= 2");
  PcsController c;
  c.method = s.method;
  c.mu_min = s.mu_min;
  c.mu_max = s.mu_max;
  c.alpha_mu = s.alpha_mu;
  c.delta_g = s.delta_g;
  c.w = s.delta_g;
  c.rescale_law = s.rescale_law;
  c.theta = s.theta;
  c.apop = {Window(std::max(s.window, 2)), s.theta_f};
  c.pccsa = {Window(std::max(s.window, 3)), s.theta_h};
  c.psa = make_psa(n, s.beta, s.theta_theta);
  return c;
}

struct Measurement {
  Performance per = Performance::Neutral;
  /// P_f, P_H or |p_theta|^2; NaN while the window is still filling.
  double signal = std::numeric_limits<double>::quiet_NaN();
};

/// Feeds one generation into the selected measure and returns its verdict.
/// `mu` is the population size that produced `out`.
inline Measurement measure_performance(PcsController& ctrl, const GenerationOutput& out, int mu, int n) {
  Measurement m;
  switch (ctrl.method) {
    case PcsMethod::None:
      break;
    case PcsMethod::Apop:
      ctrl.apop.f_med_history.push(out.f_med);
      m.per = apop_performance(ctrl.apop, &m.signal);
      break;
    case PcsMethod::PcCsa:
      ctrl.pccsa.f_rec_history.push(out.f_rec);
      m.per = pccsa_performance(ctrl.pccsa, &m.signal);
      break;
    case PcsMethod::Psa:
      psa_update(ctrl.psa, out.z_rec, out.sigma_ratio, mu, n);
      m.signal = ctrl.psa.p_theta_sq();
      m.per = psa_performance(ctrl.psa);
      break;
  }
  return m;
}

/// The wait-gated mu update. Bad grows mu to ceil(alpha mu), Good shrinks it
/// to floor(mu / alpha). When the unclamped target differs from mu, the target
/// is clamped to [mu_min, mu_max], the wait counter reset, sigma rescaled,
/// lambda and the CSA constants recomputed. Returns whether that happened.
inline bool apply_population_change(PcsController& ctrl, Performance per, EsState& state, CsaConfig& cfg) {
  if (ctrl.w > 0) {
    --ctrl.w;
    return false;
  }
  const int mu = state.mu;
  long long target = mu;
  if (per == Performance::Bad)
    target = static_cast<long long>(std::ceil(ctrl.alpha_mu * mu));
  else if (per == Performance::Good)
    target = static_cast<long long>(std::floor(mu / ctrl.alpha_mu));
  if (target == mu) return false;

  const int clamped = static_cast<int>(std::clamp<long long>(target, ctrl.mu_min, ctrl.mu_max));
  ctrl.w = ctrl.delta_g;
  state.sigma *= rescale_factor(mu, clamped, ctrl.rescale_law);
  state.mu = clamped;
  state.lambda = lambda_for(clamped, ctrl.theta);
  cfg = csa_params(cfg.variant, state.dim(), clamped);
  check_guard_rails(state);
  return true;
}

}  // namespace csaes
