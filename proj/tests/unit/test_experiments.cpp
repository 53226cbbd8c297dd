#include <gtest/gtest.h>

#include <cmath>

#include "mgs/experiments.hpp"

using namespace mgs;

namespace {

RunConfig small_config() {
  RunConfig c = default_run_config();
  c.schedule.steps = 20;
  c.sweep.zetas = {0.0, 0.2};
  c.sweep.seeds = {0, 1};
  c.sweep.chains = 400;
  c.sweep.calibrate = false;
  c.ablation.budgets = {10, 20};
  c.diagnose.pair = std::make_pair(std::string("dps"), std::string("adam-dps"));
  c.diagnose.seeds = {0, 1};
  c.diagnose.chains = 50;
  c.diagnose.trajectories = 2;
  return c;
}

}  // namespace

TEST(Experiments, TaskTargetIsExactPosterior) {
  const RunConfig c = default_run_config();
  const Task task = build_task(c);
  EXPECT_EQ(task.target.size(), 3);
  double total = 0.0;
  for (const auto& comp : task.target.components()) {
    total += comp.weight;
    EXPECT_LT(comp.covariance(0, 0), 0.02);  // the observed coordinate is pinned by y
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Experiments, SweepIsTidyAndDeterministic) {
  const RunConfig c = small_config();
  const KlTable a = run_zeta_sweep(c);
  const KlTable b = run_zeta_sweep(c);
  EXPECT_EQ(a.rows.size(), c.sweep.zetas.size() * c.sweep.methods.size() * c.sweep.seeds.size());
  EXPECT_EQ(a.to_csv(), b.to_csv());
  for (const auto& r : a.rows) EXPECT_TRUE(std::isfinite(r.kl));
  EXPECT_EQ(a.to_csv().rfind("# ", 0), 0u);
}

TEST(Experiments, CellsAreIndependentOfTheirNeighbours) {
  RunConfig c = small_config();
  const KlTable full = run_zeta_sweep(c);
  c.sweep.zetas = {0.2};
  c.sweep.seeds = {1};
  c.sweep.methods = {"adam-dps"};
  const KlTable one = run_zeta_sweep(c);
  ASSERT_EQ(one.rows.size(), 1u);
  bool found = false;
  for (const auto& r : full.rows) {
    if (r.method == "adam-dps" && r.zeta == 0.2 && r.seed == 1) {
      EXPECT_EQ(r.kl, one.rows[0].kl);
      found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Experiments, StepBudgetCellMatchesSweepCell) {
  RunConfig c = small_config();
  c.ablation.zeta = 0.2;
  c.ablation.budgets = {20};
  c.ablation.rules = {StepRule::ddpm_ancestral};
  const KlTable sweep = run_zeta_sweep(c);
  const KlTable steps = run_step_budget_ablation(c);
  for (const auto& s : steps.rows) {
    for (const auto& r : sweep.rows) {
      if (r.method == s.method && r.zeta == s.zeta && r.seed == s.seed) EXPECT_EQ(r.kl, s.kl);
    }
  }
}

TEST(Experiments, MoreStepsReduceUnconditionalDiscretizationError) {
  RunConfig c = default_run_config();
  const Task task = build_task(c);
  const MethodConfig none = c.method("none");
  const auto coarse = make_sampler_config(c, none, 0.0, 0, 12, StepRule::ddpm_ancestral);
  const auto fine = make_sampler_config(c, none, 0.0, 0, 100, StepRule::ddpm_ancestral);
  EXPECT_LE(cell_kl(c, task, fine, 20000).kl, cell_kl(c, task, coarse, 20000).kl);
}

TEST(Experiments, ExactGuidanceRecoversPosterior) {
  RunConfig c = default_run_config();
  const Task task = build_task(c);
  MethodConfig m = c.method("dps");
  m.likelihood = LikelihoodSource::exact;
  m.rho = 1.0;
  m.rho_schedule = RhoSchedule::variance;
  // Finite-sample histograms of a narrow posterior carry their own KL offset,
  // so the reference is the same estimator fed exact posterior draws.
  const int n = 20000;
  NormalSource rng(7);
  std::vector<Vector> exact;
  for (int i = 0; i < n; ++i) exact.push_back(task.target.sample(rng));
  const NoisedMixture target(task.target, 0.0);
  const double floor =
      grid_kl(exact, [&](const Vector& x) { return target.log_density(x); }, histogram_spec(c)).kl;
  const auto sc = make_sampler_config(c, m, 0.0, 0, 100, StepRule::ddpm_ancestral);
  EXPECT_LT(std::abs(cell_kl(c, task, sc, n).kl - floor), 0.05);
}

TEST(Experiments, CalibrationPicksFromGrid) {
  RunConfig c = small_config();
  c.sweep.calibration_chains = 200;
  const Task task = build_task(c);
  MethodConfig m = c.method("adam-dps");
  m.rho_grid = {0.0, 0.2};
  const double rho = calibrate_rho(c, task, m, c.schedule.steps, c.schedule.rule);
  EXPECT_TRUE(rho == 0.0 || rho == 0.2);
  EXPECT_EQ(calibrate_rho(c, task, m, c.schedule.steps, c.schedule.rule), rho);
}

TEST(Experiments, BetaAblationHasAllVariants) {
  RunConfig c = small_config();
  c.sweep.seeds = {0};
  const KlTable t = run_beta_ablation(c);
  EXPECT_EQ(t.rows.size(), 4u);
  const auto imp = relative_improvement(t, c.ablation.zeta);
  EXPECT_EQ(imp.size(), 3u);
  EXPECT_TRUE(imp.count("adam-dps-beta1-0"));
  EXPECT_EQ(t.rho.at("adam-dps-beta2-0"), t.rho.at("adam-dps"));
}

TEST(Experiments, DiagnosticsNeedAPair) {
  RunConfig c = small_config();
  c.diagnose.pair.reset();
  try {
    run_diagnostics(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "diagnose.pair");
  }
}

TEST(Experiments, UnguidedDiagnosticsHaveOnlyUndefinedCosines) {
  RunConfig c = small_config();
  c.diagnose.pair = std::make_pair(std::string("none"), std::string("none"));
  const auto bundle = run_diagnostics(c);
  for (const auto& per_seed : bundle.a.cosines) {
    for (double v : per_seed) EXPECT_TRUE(std::isnan(v));
  }
}

TEST(Experiments, DiagnosticsProjectionStartsOnVerticalAxis) {
  const RunConfig c = small_config();
  const auto bundle = run_diagnostics(c);
  ASSERT_TRUE(bundle.projection.has_value());
  const auto& p = *bundle.projection;
  const Trajectory& a = bundle.a.recorded.front();
  EXPECT_NEAR(p.a.front().x, 0.0, 1e-12);
  EXPECT_NEAR(p.a.front().y, (a.initial - build_task(c).x_true).norm(), 1e-12);
  EXPECT_EQ(bundle.timesteps.size(), static_cast<std::size_t>(c.schedule.steps));
}

TEST(Experiments, MiddleWindowCoversEightyPercent) {
  auto [lo, hi] = DiagnosticsBundle::middle_window(98);
  EXPECT_EQ(lo, 9u);
  EXPECT_EQ(hi, 89u);
  auto [lo0, hi0] = DiagnosticsBundle::middle_window(0);
  EXPECT_EQ(lo0, hi0);
}
