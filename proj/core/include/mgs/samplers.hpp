#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgs/guidance.hpp"
#include "mgs/operators.hpp"
#include "mgs/rng.hpp"
#include "mgs/schedule.hpp"
#include "mgs/score_model.hpp"

namespace mgs {

enum class StepRule { ddpm_ancestral, ddim_deterministic };
enum class GuidanceMode { none, dps, adam_dps, cg, adam_cg };

// Per-step strength rho_t applied to the (stabilized) guidance term.
enum class RhoSchedule {
  constant,  // rho
  relative,  // rho * (sigma_t^2 - sigma_s^2) / sigma_t^2
  variance,  // rho * (sigma_t^2 - sigma_s^2); rho = 1 is the plain posterior-score update
};

// Which likelihood score the DPS modes feed to the update.
enum class LikelihoodSource { dps, dps_frozen_jacobian, exact };

enum class RecordLevel {
  none,     // final sample only
  scalars,  // t, sigma, loss, cosine, k per step
  full,     // plus x_t, x_{0|t}, raw g and applied g_hat vectors
};

std::string to_string(StepRule v);
std::string to_string(GuidanceMode v);
std::string to_string(RhoSchedule v);
std::string to_string(LikelihoodSource v);
std::string to_string(RecordLevel v);
StepRule step_rule_from_string(const std::string& s);
GuidanceMode guidance_mode_from_string(const std::string& s);
RhoSchedule rho_schedule_from_string(const std::string& s);
LikelihoodSource likelihood_source_from_string(const std::string& s);
RecordLevel record_level_from_string(const std::string& s);

bool is_adam(GuidanceMode mode);
bool is_dps(GuidanceMode mode);
bool is_cg(GuidanceMode mode);

struct SamplerConfig {
  StepRule rule = StepRule::ddpm_ancestral;
  GuidanceMode mode = GuidanceMode::none;
  TimestepGrid grid;
  AdamConfig adam;  // ignored unless mode is adam-dps or adam-cg
  NoiseInjectorConfig injector;
  double rho = 0.0;
  RhoSchedule rho_schedule = RhoSchedule::constant;
  LikelihoodSource likelihood = LikelihoodSource::dps;
  std::uint64_t seed = 0;
  RecordLevel record = RecordLevel::scalars;

  double rho_at(double sigma_t, double sigma_s) const;
  void validate() const;
};

// What the guided chain conditions on. DPS modes need an observation model
// and a condition; CG modes need a class label.
struct GuidanceTask {
  std::optional<ObservationModel> observation;
  std::optional<Condition> condition;

  static GuidanceTask none() { return {}; }
  static GuidanceTask measurement(ObservationModel obs, Condition c) {
    return {std::move(obs), std::move(c)};
  }
  static GuidanceTask label(int class_index) { return {std::nullopt, Condition::label(class_index)}; }
};

struct StepRecord {
  int t = 0;
  double sigma_t = 0.0;
  double loss = 0.0;      // guidance loss at this step (NaN without guidance)
  double cos_prev = 0.0;  // cosine to the previous applied term (NaN if undefined)
  long adam_k = 0;
  Vector x_t;
  Vector x0;
  Vector g_raw;  // after noise injection, before stabilization
  Vector g_hat;  // the term actually applied
};

// One record per grid entry: a record for every transition t -> s plus a
// terminal record at t_0 holding the final sample (empty at RecordLevel::none).
struct Trajectory {
  int chain = 0;
  Vector initial;
  Vector final_sample;
  std::vector<StepRecord> records;
};

// Mean and std of the Gaussian reverse transition Sample(x0, x_t, t, s).
Vector ancestral_mean(const Vector& x0, const Vector& x_t, double sigma_t, double sigma_s);
double ancestral_std(double sigma_t, double sigma_s);

// One stochastic reverse step with an explicit standard normal draw.
Vector ancestral_step(const ScoreModel& model, const Vector& x_t, int t, int s, const Vector& eps);
Vector ancestral_step(const ScoreModel& model, const Vector& x_t, int t, int s, NormalSource& rng);
// Deterministic rule x_s = x0 + (sigma_s / sigma_t)(x_t - x0).
Vector ddim_step(const ScoreModel& model, const Vector& x_t, int t, int s);

// Chain seeds: sampler stream seed + chain, injector stream injector.seed + chain.
Trajectory sample_chain(const ScoreModel& model, const GuidanceTask& task,
                        const SamplerConfig& config, int chain = 0);

Trajectory unconditional_chain(const ScoreModel& model, const SamplerConfig& config, int chain = 0);
Trajectory dps_guided_chain(const ScoreModel& model, const ObservationModel& observation,
                            const Condition& condition, const SamplerConfig& config,
                            int chain = 0);
Trajectory cg_guided_chain(const ScoreModel& model, int class_index, const SamplerConfig& config,
                           int chain = 0);

// n independent chains; results ordered by chain index and independent of
// `jobs` (worker threads, 0 = hardware concurrency).
std::vector<Trajectory> run_batch(const ScoreModel& model, const GuidanceTask& task,
                                  const SamplerConfig& config, int n_chains, int jobs = 1);

// Final samples only, for large sweeps.
std::vector<Vector> final_samples(const std::vector<Trajectory>& chains);

}  // namespace mgs
