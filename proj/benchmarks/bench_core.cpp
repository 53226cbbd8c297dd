#include <benchmark/benchmark.h>

#include "mgs/experiments.hpp"
#include "mgs/guidance.hpp"
#include "mgs/samplers.hpp"

using namespace mgs;

namespace {

const Task& default_task() {
  static const Task task = build_task(default_run_config());
  return task;
}

void BM_MixtureScore(benchmark::State& state) {
  const NoisedMixture mix(GmmPrior::default_synthetic(), 0.7);
  const bool hessian = state.range(0) != 0;
  MixtureEval eval;
  Vector x = (Vector(2) << 0.3, -0.4).finished();
  for (auto _ : state) {
    mix.evaluate(x, hessian, eval);
    benchmark::DoNotOptimize(eval.score.data());
  }
}
BENCHMARK(BM_MixtureScore)->Arg(0)->Arg(1);

void BM_DpsLikelihoodScore(benchmark::State& state) {
  const Task& task = default_task();
  const Vector x = (Vector(2) << -1.0, 0.5).finished();
  for (auto _ : state) {
    auto term = dps_likelihood_score(task.model, *task.guidance.observation, *task.guidance.condition, x, 40);
    benchmark::DoNotOptimize(term.g.data());
  }
}
BENCHMARK(BM_DpsLikelihoodScore);

void BM_AdamUpdate(benchmark::State& state) {
  const auto d = static_cast<int>(state.range(0));
  MomentState s = reset_moments(d);
  const Vector g = Vector::LinSpaced(d, -1.0, 1.0);
  Vector g_hat;
  const AdamConfig cfg;
  for (auto _ : state) {
    adaptive_moment_update(g, s, cfg, g_hat);
    benchmark::DoNotOptimize(g_hat.data());
  }
}
BENCHMARK(BM_AdamUpdate)->Arg(2)->Arg(4096);

void BM_Chain(benchmark::State& state) {
  const Task& task = default_task();
  const RunConfig cfg = default_run_config();
  const auto mode = static_cast<GuidanceMode>(state.range(0));
  MethodConfig m = cfg.method(to_string(mode));
  const SamplerConfig sc = make_sampler_config(cfg, m, 0.175, 0, 100, StepRule::ddpm_ancestral);
  int chain = 0;
  for (auto _ : state) {
    auto tr = sample_chain(task.model, task.guidance, sc, chain++);
    benchmark::DoNotOptimize(tr.final_sample.data());
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_Chain)
    ->Arg(static_cast<int>(GuidanceMode::none))
    ->Arg(static_cast<int>(GuidanceMode::dps))
    ->Arg(static_cast<int>(GuidanceMode::adam_dps));

}  // namespace
