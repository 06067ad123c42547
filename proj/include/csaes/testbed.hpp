#pragma once

// Test functions, run initialization and termination classification.

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "csaes/core_es.hpp"
#include "csaes/rng.hpp"
#include "csaes/theory.hpp"

namespace csaes {

enum class ObjectiveKind { Sphere, Random, Rastrigin };

inline std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Sphere: return "sphere";
    case ObjectiveKind::Random: return "random";
    case ObjectiveKind::Rastrigin: return "rastrigin";
  }
  return "?";
}

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::Sphere;
  int dim = 10;
  double amplitude = 0.0;  // Rastrigin A
  double frequency = 0.0;  // Rastrigin alpha

  static ObjectiveSpec sphere(int n) { return {ObjectiveKind::Sphere, n, 0.0, 0.0}; }
  static ObjectiveSpec random(int n) { return {ObjectiveKind::Random, n, 0.0, 0.0}; }
  static ObjectiveSpec rastrigin(int n, double a, double alpha = 2.0 * std::numbers::pi) {
    return {ObjectiveKind::Rastrigin, n, a, alpha};
  }

  void validate() const {
    if (dim < 1) throw std::invalid_argument("objective dimension must be >= 1");
    if (kind == ObjectiveKind::Rastrigin && !(amplitude > 0.0 && frequency > 0.0))
      throw std::invalid_argument("Rastrigin needs A > 0 and alpha > 0");
  }
};

inline double sphere_value(std::span<const double> y) {
  double acc = 0.0;
  for (double v : y) acc += v * v;
  return acc;
}

inline double rastrigin_value(std::span<const double> y, double a, double alpha) {
  double acc = 0.0;
  for (double v : y) acc += v * v + a * (1.0 - std::cos(alpha * v));
  return acc;
}

/// Evaluates an ObjectiveSpec and counts calls.
class Objective {
 public:
  explicit Objective(ObjectiveSpec spec) : spec_(spec) { spec_.validate(); }

  double operator()(std::span<const double> y, Rng& rng) {
    ++evaluations_;
    switch (spec_.kind) {
      case ObjectiveKind::Sphere: return sphere_value(y);
      case ObjectiveKind::Random: return normal_(rng);
      case ObjectiveKind::Rastrigin: return rastrigin_value(y, spec_.amplitude, spec_.frequency);
    }
    return 0.0;
  }

  const ObjectiveSpec& spec() const { return spec_; }
  long long evaluations() const { return evaluations_; }

 private:
  ObjectiveSpec spec_;
  long long evaluations_ = 0;
  NormalSampler normal_;
};

/// Initial state: s = 1, sigma from the approximate second zero at
/// (N, mu0). Rastrigin starts at 2*ceil(alpha*A/2) * 1, the sphere at
/// r0 * e_1, the random function at the origin with sigma = 1.
inline EsState init_run(const ObjectiveSpec& spec, int mu0, double theta, double r0 = 1.0) {
  spec.validate();
  const int n = spec.dim;
  EsState st;
  st.mu = mu0;
  st.lambda = lambda_for(mu0, theta);
  st.s.assign(n, 1.0);
  st.y.assign(n, 0.0);
  switch (spec.kind) {
    case ObjectiveKind::Random:
      st.sigma = 1.0;
      return st;
    case ObjectiveKind::Sphere:
      st.y[0] = r0;
      break;
    case ObjectiveKind::Rastrigin:
      st.y.assign(n, 2.0 * std::ceil(spec.frequency * spec.amplitude / 2.0));
      break;
  }
  const double zero = second_zero_approx(n, mu0, progress_coefficient(theta));
  st.sigma = zero * norm(st.y) / n;
  return st;
}

struct TerminationSpec {
  double f_stop = 1e-3;
  double sigma_stop = 1e-3;
  long long g_max = 100000;
  long long eval_max = 100000000;

  /// The random function has no target: only the budgets apply.
  static TerminationSpec budget_only(long long g_max, long long eval_max = 100000000) {
    return {-std::numeric_limits<double>::infinity(), 0.0, g_max, eval_max};
  }
};

enum class Outcome { Success, LocalConvergence, Budget, Diverged, Running };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::LocalConvergence: return "local";
    case Outcome::Budget: return "budget";
    case Outcome::Diverged: return "diverged";
    case Outcome::Running: return "running";
  }
  return "?";
}

/// Checked in order: success, local convergence, budget, divergence.
inline Outcome classify_termination(const EsState& state, double f, const TerminationSpec& term,
                                    long long evaluations, bool diverged = false) {
  if (f < term.f_stop) return Outcome::Success;
  if (state.sigma < term.sigma_stop && f >= term.f_stop) return Outcome::LocalConvergence;
  if (state.g >= term.g_max || evaluations >= term.eval_max) return Outcome::Budget;
  if (diverged) return Outcome::Diverged;
  return Outcome::Running;
}

}  // namespace csaes
