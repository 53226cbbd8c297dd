#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mgs/exact.hpp"
#include "mgs/samplers.hpp"

using namespace mgs;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

NoiseSchedule default_schedule() { return NoiseSchedule::build(ScheduleKind::geometric, 0.01, 25.0, 100); }

GmmPrior gaussian_prior() {
  return GmmPrior({{1.0, v2(1.0, -0.5), (Matrix(2, 2) << 1.0, 0.3, 0.3, 0.6).finished()}});
}

GmmPrior separated_prior() {
  const Matrix c = 0.3 * Matrix::Identity(2, 2);
  return GmmPrior({{0.4, v2(-6, -3), c}, {0.35, v2(0, 6), c}, {0.25, v2(6, -3), c}});
}

SamplerConfig base_config(const NoiseSchedule& s, int steps = 100) {
  SamplerConfig c;
  c.grid = TimestepGrid::uniform(s, steps);
  c.seed = 77;
  c.injector.seed = 78;
  c.record = RecordLevel::full;
  return c;
}

struct Moments {
  Vector mean;
  Matrix cov;
};

Moments moments(const std::vector<Vector>& xs) {
  const auto n = static_cast<double>(xs.size());
  Vector mean = Vector::Zero(xs[0].size());
  for (const auto& x : xs) mean += x;
  mean /= n;
  Matrix cov = Matrix::Zero(mean.size(), mean.size());
  for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose();
  cov /= n - 1;
  return {mean, cov};
}

}  // namespace

TEST(AncestralStep, DegenerateTransitionIsIdentity) {
  const Vector x0 = v2(0.2, 0.1), xt = v2(1.0, -2.0);
  EXPECT_EQ(ancestral_mean(x0, xt, 1.5, 1.5), xt);
  EXPECT_EQ(ancestral_std(1.5, 1.5), 0.0);
}

TEST(AncestralStep, TerminalStepCollapsesToTweedie) {
  const ScoreModel model(GmmPrior::default_synthetic(), NoiseSchedule({0.0, 0.8}, ScheduleKind::linear));
  const Vector xt = v2(0.5, 1.0);
  const Vector eps = v2(3.0, -2.0);
  EXPECT_EQ(ancestral_step(model, xt, 1, 0, eps), model.tweedie_denoise(xt, 1));
  EXPECT_EQ(ancestral_std(0.8, 0.0), 0.0);
  EXPECT_THROW(ancestral_step(model, xt, 0, 1, eps), OrderingError);
}

TEST(AncestralStep, MeanAndSpreadFollowTweedieComposition) {
  const ScoreModel model(GmmPrior::default_synthetic(), NoiseSchedule({0.0, 1.0, 2.0}, ScheduleKind::linear));
  const Vector xt = v2(0.4, 1.7);
  const Vector eps = v2(0.5, -1.5);
  const Vector x0 = model.tweedie_denoise(xt, 2);
  const Vector expect = x0 + 0.25 * (xt - x0) + std::sqrt(3.0) / 2.0 * eps;
  EXPECT_LT((ancestral_step(model, xt, 2, 1, eps) - expect).norm(), 1e-12);
}

// The ancestral sampler is affine-Gaussian for a Gaussian prior N(m, C): the
// Tweedie estimate is m + S (x - m) with S = C (C + st^2 I)^{-1}, so every
// marginal of the chain is Gaussian and follows from propagating its moments.
Moments sampler_marginal(const Vector& m, const Matrix& c, const NoiseSchedule& schedule,
                         const TimestepGrid& grid) {
  const auto d = m.size();
  const Matrix id = Matrix::Identity(d, d);
  Vector mean = Vector::Zero(d);
  const double s_top = schedule.sigma(grid[0]);
  Matrix cov = s_top * s_top * id;
  for (int i = 0; i < grid.transitions(); ++i) {
    const double st = schedule.sigma(grid[i]);
    const double ss = schedule.sigma(grid[i + 1]);
    const Matrix shrink = c * (c + st * st * id).inverse();
    const Matrix map = shrink + (ss * ss) / (st * st) * (id - shrink);
    const double sd = ancestral_std(st, ss);
    mean = m + map * (mean - m);
    cov = map * cov * map.transpose() + sd * sd * id;
  }
  return {mean, cov};
}

void expect_matches_marginal(const std::vector<Vector>& xs, const Moments& expect, double cov_tol) {
  const Moments mo = moments(xs);
  const auto n = static_cast<double>(xs.size());
  for (Eigen::Index i = 0; i < expect.mean.size(); ++i) {
    EXPECT_LT(std::abs(mo.mean[i] - expect.mean[i]), 3 * std::sqrt(expect.cov(i, i) / n)) << "axis " << i;
  }
  EXPECT_LT((mo.cov - expect.cov).norm() / expect.cov.norm(), cov_tol);
}

TEST(AncestralSampler, GaussianPriorMatchesClosedFormMarginal) {
  const GmmPrior prior = gaussian_prior();
  const ScoreModel model(prior, default_schedule());
  SamplerConfig cfg = base_config(model.schedule());
  cfg.record = RecordLevel::none;
  const auto xs = final_samples(run_batch(model, GuidanceTask::none(), cfg, 50000, 1));
  const auto& comp = prior.component(0);
  const Moments expect = sampler_marginal(comp.mean, comp.covariance, model.schedule(), cfg.grid);
  expect_matches_marginal(xs, expect, 0.02);
  // The oracle itself sits close to the prior; the gap is the step discretization.
  EXPECT_LT((expect.mean - comp.mean).norm(), 1e-2);
  EXPECT_LT((expect.cov - comp.covariance).norm() / comp.covariance.norm(), 0.08);
}

TEST(AncestralSampler, DiscretizationGapShrinksWithSteps) {
  const GmmPrior prior = gaussian_prior();
  const auto& comp = prior.component(0);
  const auto coarse = NoiseSchedule::build(ScheduleKind::geometric, 0.01, 25.0, 100);
  const auto fine = NoiseSchedule::build(ScheduleKind::geometric, 0.01, 25.0, 1000);
  const auto gap = [&](const NoiseSchedule& s) {
    const Moments m = sampler_marginal(comp.mean, comp.covariance, s, TimestepGrid::uniform(s, s.max_index()));
    return (m.cov - comp.covariance).norm();
  };
  EXPECT_LT(gap(fine), 0.2 * gap(coarse));
}

TEST(DdimStep, Limits) {
  const ScoreModel model(GmmPrior::default_synthetic(), NoiseSchedule({0.0, 1.0}, ScheduleKind::linear));
  const Vector xt = v2(-1.0, 2.0);
  EXPECT_EQ(ddim_step(model, xt, 1, 0), model.tweedie_denoise(xt, 1));
  const ScoreModel close(GmmPrior::default_synthetic(), NoiseSchedule({1.0, 1.0 + 1e-12}, ScheduleKind::linear));
  EXPECT_LT((ddim_step(close, xt, 1, 0) - xt).norm(), 1e-10);
}

TEST(DdimStep, GaussianPriorComposesLinearMaps) {
  // With x_0 ~ N(m, C) the Tweedie estimate is m + S (x_t - m), S = C (C + st^2 I)^{-1},
  // so a DDIM step is the affine map m + (S + ss/st (I - S)) (x_t - m).
  const GmmPrior prior = gaussian_prior();
  const std::vector<double> sig{0.0, 0.7, 2.5};
  const ScoreModel model(prior, NoiseSchedule(sig, ScheduleKind::linear));
  const Matrix c = prior.component(0).covariance;
  const Vector m = prior.component(0).mean;
  const Matrix i2 = Matrix::Identity(2, 2);
  auto step_map = [&](double st, double ss) {
    const Matrix shrink = c * (c + st * st * i2).inverse();
    return Matrix(shrink + (ss / st) * (i2 - shrink));
  };
  const Vector xT = v2(3.0, -4.0);
  const Vector two = ddim_step(model, ddim_step(model, xT, 2, 1), 1, 0);
  const Vector one = ddim_step(model, xT, 2, 0);
  const Vector expect_two = m + step_map(0.7, 0.0) * step_map(2.5, 0.7) * (xT - m);
  const Vector expect_one = m + step_map(2.5, 0.0) * (xT - m);
  EXPECT_LT((two - expect_two).norm(), 1e-12);
  EXPECT_LT((one - expect_one).norm(), 1e-12);
}

TEST(Sampler, ZeroStrengthReproducesUnconditionalChain) {
  const GmmPrior prior = GmmPrior::default_synthetic();
  const ScoreModel model(prior, default_schedule());
  const auto obs = ObservationModel::gaussian(LinearOperator::mask(2, {0}), 0.1);
  const Condition y = Condition::measurement((Vector(1) << -2.0).finished());
  for (StepRule rule : {StepRule::ddpm_ancestral, StepRule::ddim_deterministic}) {
    SamplerConfig cfg = base_config(model.schedule(), 50);
    cfg.rule = rule;
    cfg.injector.zeta = 0.2;
    const Trajectory base = unconditional_chain(model, cfg, 3);
    for (GuidanceMode mode : {GuidanceMode::dps, GuidanceMode::adam_dps, GuidanceMode::cg, GuidanceMode::adam_cg}) {
      for (RhoSchedule sched : {RhoSchedule::constant, RhoSchedule::relative, RhoSchedule::variance}) {
        SamplerConfig g = cfg;
        g.mode = mode;
        g.rho = 0.0;
        g.rho_schedule = sched;
        const Trajectory tr = is_dps(mode) ? dps_guided_chain(model, obs, y, g, 3) : cg_guided_chain(model, 1, g, 3);
        ASSERT_EQ(tr.final_sample, base.final_sample) << to_string(mode);
        for (std::size_t i = 0; i < base.records.size(); ++i) EXPECT_EQ(tr.records[i].x_t, base.records[i].x_t);
      }
    }
  }
}

TEST(Sampler, RecordsOnePerGridEntry) {
  const ScoreModel model(GmmPrior::default_synthetic(), default_schedule());
  SamplerConfig cfg = base_config(model.schedule(), 25);
  const Trajectory tr = unconditional_chain(model, cfg);
  ASSERT_EQ(tr.records.size(), 26u);
  EXPECT_EQ(tr.records.front().t, 100);
  EXPECT_EQ(tr.records.back().t, 0);
  EXPECT_EQ(tr.records.back().x_t, tr.final_sample);
  for (const auto& r : tr.records) EXPECT_TRUE(std::isnan(r.cos_prev));
  cfg.record = RecordLevel::none;
  EXPECT_TRUE(unconditional_chain(model, cfg).records.empty());
}

TEST(Sampler, ExactGuidanceSamplesTheConjugatePosterior) {
  // With the exact likelihood score the update is the unconditional sampler of
  // the posterior N(m_y, C_y), whose chain marginal is again closed form.
  const GmmPrior prior = gaussian_prior();
  const ScoreModel model(prior, default_schedule());
  const auto obs = ObservationModel::gaussian(LinearOperator::identity(2), 0.3);
  const Condition y = Condition::measurement(v2(2.0, 0.5));
  SamplerConfig cfg = base_config(model.schedule());
  cfg.record = RecordLevel::none;
  cfg.mode = GuidanceMode::dps;
  cfg.likelihood = LikelihoodSource::exact;
  cfg.rho = 1.0;
  cfg.rho_schedule = RhoSchedule::variance;
  const auto xs = final_samples(run_batch(model, GuidanceTask::measurement(obs, y), cfg, 20000, 1));
  const auto post = exact_posterior(prior, obs, y).component(0);
  expect_matches_marginal(xs, sampler_marginal(post.mean, post.covariance, model.schedule(), cfg.grid), 0.04);
}

TEST(Sampler, AdamCgClassifiesToTargetClass) {
  const GmmPrior prior = separated_prior();
  const ScoreModel model(prior, default_schedule());
  SamplerConfig cfg = base_config(model.schedule());
  cfg.record = RecordLevel::none;
  cfg.mode = GuidanceMode::adam_cg;
  cfg.rho = 1.0;
  cfg.rho_schedule = RhoSchedule::relative;
  const NoisedMixture clean(prior, 0.0);
  for (int label = 0; label < 3; ++label) {
    const auto xs = final_samples(run_batch(model, GuidanceTask::label(label), cfg, 1000, 1));
    int hits = 0;
    for (const auto& x : xs) {
      Eigen::Index best = 0;
      clean.responsibilities(x).maxCoeff(&best);
      hits += best == label;
    }
    EXPECT_GE(hits, 950) << "class " << label;
  }
}

TEST(Sampler, AdamCgTerminalLossNotAboveCg) {
  const GmmPrior prior = GmmPrior::default_synthetic();
  const ScoreModel model(prior, default_schedule());
  std::vector<double> cg, adam;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (GuidanceMode mode : {GuidanceMode::cg, GuidanceMode::adam_cg}) {
      SamplerConfig cfg = base_config(model.schedule());
      cfg.record = RecordLevel::scalars;
      cfg.mode = mode;
      cfg.rho = 1.0;
      cfg.rho_schedule = RhoSchedule::relative;
      cfg.seed = seed << 32;
      cfg.injector.seed = cfg.seed | (1ULL << 63);
      cfg.injector.zeta = 0.175;
      const auto chains = run_batch(model, GuidanceTask::label(1), cfg, 500, 1);
      double total = 0.0;
      for (const auto& c : chains) total += c.records.back().loss;
      (mode == GuidanceMode::cg ? cg : adam).push_back(total / 500.0);
    }
  }
  std::sort(cg.begin(), cg.end());
  std::sort(adam.begin(), adam.end());
  EXPECT_LE(adam[2], cg[2]);
}

TEST(RunBatch, SingleChainMatchesDirectCall) {
  const ScoreModel model(GmmPrior::default_synthetic(), default_schedule());
  const SamplerConfig cfg = base_config(model.schedule(), 20);
  const auto batch = run_batch(model, GuidanceTask::none(), cfg, 1, 1);
  EXPECT_EQ(batch[0].final_sample, unconditional_chain(model, cfg, 0).final_sample);
}

TEST(RunBatch, IndependentOfWorkerCountAndOrder) {
  const ScoreModel model(GmmPrior::default_synthetic(), default_schedule());
  SamplerConfig cfg = base_config(model.schedule(), 30);
  cfg.mode = GuidanceMode::adam_cg;
  cfg.rho = 1.0;
  cfg.injector.zeta = 0.1;
  const auto task = GuidanceTask::label(2);
  const auto one = run_batch(model, task, cfg, 13, 1);
  const auto many = run_batch(model, task, cfg, 13, 4);
  for (int c = 12; c >= 0; --c) {
    const Trajectory alone = sample_chain(model, task, cfg, c);
    EXPECT_EQ(one[static_cast<std::size_t>(c)].final_sample, alone.final_sample);
    EXPECT_EQ(many[static_cast<std::size_t>(c)].final_sample, alone.final_sample);
  }
}

TEST(Sampler, ConfigurationErrors) {
  const ScoreModel model(GmmPrior::default_synthetic(), default_schedule());
  SamplerConfig cfg = base_config(model.schedule(), 10);
  cfg.mode = GuidanceMode::dps;
  cfg.rho = 1.0;
  EXPECT_THROW(sample_chain(model, GuidanceTask::none(), cfg), ConfigError);
  cfg.mode = GuidanceMode::cg;
  EXPECT_THROW(sample_chain(model, GuidanceTask::label(5), cfg), ConfigError);
  cfg.rho = -1.0;
  EXPECT_THROW(sample_chain(model, GuidanceTask::label(0), cfg), ConfigError);
  const ScoreModel single(gaussian_prior(), default_schedule());
  cfg.rho = 1.0;
  EXPECT_THROW(sample_chain(single, GuidanceTask::label(0), cfg), ClassificationError);
  EXPECT_THROW(run_batch(model, GuidanceTask::none(), base_config(model.schedule()), 0), ConfigError);
}

TEST(Sampler, DivergenceIsReportedWithStep) {
  const ScoreModel model(GmmPrior::default_synthetic(), default_schedule());
  const auto obs = ObservationModel::gaussian(LinearOperator::mask(2, {0}), 0.1);
  const Condition y = Condition::measurement((Vector(1) << -2.0).finished());
  SamplerConfig cfg = base_config(model.schedule());
  cfg.mode = GuidanceMode::dps;
  cfg.rho = 1e300;
  try {
    dps_guided_chain(model, obs, y, cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}
