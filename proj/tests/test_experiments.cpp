#include <gtest/gtest.h>

#include <cmath>

#include "csaes/experiments.hpp"

using namespace csaes;

TEST(Percentile, LinearInterpolation) {
  const std::vector<double> v{4, 4, 8, 8, 16, 1024, 4, 32, 64, 128, 256};
  EXPECT_DOUBLE_EQ(percentile(v, 25), 6.0);
  EXPECT_DOUBLE_EQ(percentile(v, 50), 16.0);
  EXPECT_DOUBLE_EQ(percentile(v, 75), 96.0);
  EXPECT_DOUBLE_EQ(percentile({4, 4, 4, 1024, 1024, 8}, 75), 770.0);
  EXPECT_DOUBLE_EQ(median_of({3.0}), 3.0);
  EXPECT_THROW(percentile({}, 50), std::invalid_argument);
}

TEST(ParamSets, P1AndP2) {
  const auto p1 = ParamSet::p1(100);
  EXPECT_EQ(p1.window, 10);
  EXPECT_DOUBLE_EQ(p1.beta, 0.1);
  EXPECT_DOUBLE_EQ(p1.alpha_mu, 1.05);
  EXPECT_EQ(p1.delta_g, 0);
  EXPECT_EQ(ParamSet::p1(10).window, 4);
  const auto p2 = ParamSet::p2();
  EXPECT_EQ(p2.window, 10);
  EXPECT_DOUBLE_EQ(p2.alpha_mu, 2.0);
  EXPECT_EQ(p2.delta_g, 10);
  EXPECT_EQ(p2.rescale_law, RescaleLaw::Sqrt);
}

TEST(Aggregate, ExpectedRuntimeEquivalentForms) {
  BenchmarkConfig bc;
  bc.id = "x";
  std::vector<TrialRecord> recs(4);
  recs[0].outcome = Outcome::Success;
  recs[0].evals = 100;
  recs[1].outcome = Outcome::Success;
  recs[1].evals = 300;
  recs[2].outcome = Outcome::LocalConvergence;
  recs[2].evals = 1000;
  recs[3].outcome = Outcome::Budget;
  recs[3].evals = 600;
  const auto r = aggregate(bc, recs);
  EXPECT_EQ(r.successes, 2);
  EXPECT_DOUBLE_EQ(r.p_success, 0.5);
  // Mean successful evals + mean failed evals * (1 - P_S) / P_S.
  const double fs = 200.0, fu = 800.0, ps = 0.5;
  ASSERT_TRUE(r.e_runtime.has_value());
  EXPECT_DOUBLE_EQ(*r.e_runtime, fs + (1 - ps) / ps * fu);

  for (auto& t : recs) t.outcome = Outcome::Budget;
  EXPECT_FALSE(aggregate(bc, recs).e_runtime.has_value());
}

namespace {

TrialConfig sphere_trial(PcsMethod method, int n) {
  TrialConfig tc;
  tc.objective = ObjectiveSpec::sphere(n);
  tc.csa = CsaVariant::SqrtN;
  tc.pcs = pcs_settings(method, ParamSet::p2(), 4, 1024);
  tc.mu0 = 8;
  tc.term = {1e-20, 0.0, 3000, 100000000};
  tc.keep_trace = true;
  return tc;
}

}  // namespace

// method = none must be the plain CSA-ES, bit for bit.
TEST(PcsTrial, MethodNoneReproducesPlainCsa) {
  const TrialConfig tc = sphere_trial(PcsMethod::None, 20);
  Rng a = trial_stream(5, "reduction", 0);
  const TrialRecord rec = run_pcs_trial(tc, a);

  Rng b = trial_stream(5, "reduction", 0);
  EsState st = init_run(tc.objective, tc.mu0, 0.5);
  const CsaConfig cfg = csa_params(tc.csa, 20, tc.mu0);
  Objective obj(tc.objective);
  ASSERT_EQ(rec.trace.size(), static_cast<std::size_t>(rec.generations));
  for (const auto& row : rec.trace) {
    const auto out = run_generation(st, cfg, obj, b);
    ASSERT_EQ(row.f_rec, out.f_rec);
    ASSERT_EQ(row.sigma, st.sigma);
    ASSERT_EQ(row.mu, tc.mu0);
  }
  EXPECT_EQ(rec.final_sigma, st.sigma);
  EXPECT_EQ(rec.evals, obj.evaluations());
  EXPECT_EQ(rec.outcome, Outcome::Success);
}

TEST(PcsTrial, EvaluationCount) {
  TrialConfig tc = sphere_trial(PcsMethod::None, 5);
  tc.term = TerminationSpec::budget_only(37);
  Rng rng = make_stream(1);
  const auto rec = run_pcs_trial(tc, rng);
  EXPECT_EQ(rec.outcome, Outcome::Budget);
  EXPECT_EQ(rec.generations, 37);
  EXPECT_EQ(rec.evals, 37LL * (16 + 1));
  EXPECT_DOUBLE_EQ(rec.mu_med, 8.0);
}

TEST(PcsTrial, ResultsIndependentOfWorkerCount) {
  const TrialConfig tc = sphere_trial(PcsMethod::Apop, 10);
  const auto one = run_trials(tc, "workers", 4, 9, 1);
  const auto three = run_trials(tc, "workers", 4, 9, 3);
  for (int t = 0; t < 4; ++t) {
    EXPECT_EQ(one[t].evals, three[t].evals);
    EXPECT_EQ(one[t].final_f, three[t].final_f);
    EXPECT_EQ(one[t].mu_med, three[t].mu_med);
  }
  EXPECT_NE(one[0].final_f, one[1].final_f);
}

TEST(PcsTrial, MuTraceRespectsBoundsAndSpacing) {
  TrialConfig tc = sphere_trial(PcsMethod::Psa, 10);
  tc.pcs.mu_min = 4;
  tc.pcs.mu_max = 64;
  const int dg = tc.pcs.delta_g;
  Rng rng = make_stream(3);
  const auto rec = run_pcs_trial(tc, rng);
  long long last_change = -1000;
  for (std::size_t i = 0; i < rec.trace.size(); ++i) {
    EXPECT_GE(rec.trace[i].mu, 4);
    EXPECT_LE(rec.trace[i].mu, 64);
    if (i > 0 && rec.trace[i].mu != rec.trace[i - 1].mu) {
      EXPECT_GE(static_cast<long long>(i) - last_change, dg + 1);
      last_change = static_cast<long long>(i);
    }
  }
}

TEST(PcsTrial, DivergenceIsRecorded) {
  TrialConfig tc = sphere_trial(PcsMethod::None, 5);
  tc.r0 = 1e200;
  tc.term = TerminationSpec::budget_only(1000);
  Rng rng = make_stream(2);
  const auto rec = run_pcs_trial(tc, rng);
  EXPECT_EQ(rec.outcome, Outcome::Diverged);
  EXPECT_FALSE(rec.diagnostic.empty());
}

TEST(Schedule, SmallSqrtRescaleConverges) {
  ScheduleSpec s;
  s.dim = 10;
  s.csa = CsaVariant::SqrtN;
  s.law = RescaleLaw::Sqrt;
  s.mu_max = 64;
  s.keep_trace = true;
  Rng rng = make_stream(4);
  const auto res = run_schedule(s, rng);
  EXPECT_EQ(res.verdict, ScheduleVerdict::Converged);
  EXPECT_LT(res.final_r, 1e-12);
  EXPECT_GE(res.oscillations, 1);
  for (const auto& p : res.trace) {
    if (p.g <= s.hold) EXPECT_EQ(p.mu, 4);
    EXPECT_LE(p.mu, 64);
  }
}

TEST(GenerationCount, SmallRunFinishes) {
  const auto r = measure_generation_count(CsaVariant::SqrtN, 10, 10, 1e-3, 3, 100000, 1, 1);
  EXPECT_EQ(r.unfinished, 0);
  EXPECT_GT(r.mean_generations, 10.0);
}

TEST(Gamma, SmallRunInUnitInterval) {
  SphereRunSpec spec;
  spec.dim = 20;
  spec.mu = 10;
  spec.r_ratio_stop = 1e-6;
  const auto g = measure_gamma(spec, 3, 1, 1);
  EXPECT_EQ(g.diverged, 0);
  EXPECT_GT(g.gamma, 0.5);
  EXPECT_LT(g.gamma, 1.1);
}

TEST(Signals, FixedMuKeepsHorizonAndFillsWindow) {
  SignalSpec spec;
  spec.method = PcsMethod::Apop;
  spec.objective = ObjectiveSpec::random(10);
  spec.mu = 5;
  spec.horizon = 50;
  Rng rng = make_stream(6);
  const auto rows = measure_signals_fixed_mu(spec, rng);
  ASSERT_EQ(rows.size(), 50u);
  for (int g = 0; g < 9; ++g) EXPECT_TRUE(std::isnan(rows[g].signal));
  for (int g = 9; g < 50; ++g) {
    EXPECT_GE(rows[g].signal, 0.0);
    EXPECT_LE(rows[g].signal, 1.0);
  }
  spec.method = PcsMethod::None;
  EXPECT_THROW(measure_signals_fixed_mu(spec, rng), std::invalid_argument);
}

TEST(MedianShift, UnitAlphaGivesIdenticalMedians) {
  Rng rng = make_stream(8);
  const auto m = median_shift_oracle(20, 5, 10, 1.0, 0.3, 1.0, 50, rng);
  EXPECT_EQ(m.after_rescaled, m.after_unrescaled);
  EXPECT_GT(m.after_rescaled, 0.0);
}
