#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mgs/config.hpp"
#include "mgs/metrics.hpp"
#include "mgs/samplers.hpp"

namespace mgs {

// Everything a cell needs: the analytic model, what guidance conditions on,
// the exact target distribution and the ground truth used for projections.
struct Task {
  ScoreModel model;
  GuidanceTask guidance;
  GmmPrior target;  // exact posterior (or the prior when unconditional)
  Vector x_true;
};

Task build_task(const RunConfig& config);

// Sampler settings for one method cell. Injector seeds derive from the
// sampler seed so every (method, zeta, seed) cell is reproducible alone.
SamplerConfig make_sampler_config(const RunConfig& config, const MethodConfig& method,
                                  double zeta, std::uint64_t seed, int steps, StepRule rule);

HistogramSpec histogram_spec(const RunConfig& config);

KlEstimate cell_kl(const RunConfig& config, const Task& task, const SamplerConfig& sampler,
                   int chains);

struct KlRow {
  std::string method;
  double zeta = 0.0;
  std::uint64_t seed = 0;
  int steps = 0;
  StepRule rule = StepRule::ddpm_ancestral;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double rho = 0.0;
  double kl = 0.0;
  long clamped = 0;
};

struct KlTable {
  std::vector<KlRow> rows;
  std::map<std::string, double> rho;  // strength used per method (after calibration)

  // Median KL over seeds for (method, zeta[, steps, rule]).
  double median(const std::string& method, double zeta) const;
  double median(const std::string& method, double zeta, int steps, StepRule rule) const;
  std::string to_csv(const std::string& table = "kl") const;
};

using Progress = std::function<void(const std::string&)>;

// Picks the strength from the method's grid that minimizes the median KL at
// zeta = 0 over the calibration seeds (disjoint from evaluation seeds).
double calibrate_rho(const RunConfig& config, const Task& task, const MethodConfig& method,
                     int steps, StepRule rule, const Progress& progress = {});

KlTable run_zeta_sweep(const RunConfig& config, const Progress& progress = {});

// Variants: default Adam, beta1 = 0, beta2 = 0, plus the DPS baseline, all
// at the ablation zeta. The variants reuse full Adam's strength unless
// ablation.recalibrate_variants is set.
KlTable run_beta_ablation(const RunConfig& config, const Progress& progress = {});

// Relative KL improvement over the DPS baseline, per variant.
std::map<std::string, double> relative_improvement(const KlTable& table, double zeta);

KlTable run_step_budget_ablation(const RunConfig& config, const Progress& progress = {});

struct MethodDiagnostics {
  std::string method;
  std::vector<std::vector<double>> cosines;  // per seed, per-step median across chains
  std::vector<double> middle_cosine;         // per seed, median over chains x middle 80% of steps
  double rho = 0.0;
  DiagnosticSeries cosine;                   // over all chains of all seeds
  DiagnosticSeries loss;
  std::vector<Trajectory> recorded;  // full records for the first chains of seed 0
};

struct DiagnosticsBundle {
  MethodDiagnostics a;
  MethodDiagnostics b;
  std::vector<int> timesteps;  // t of each transition record
  std::optional<Projection> projection;
  double zeta = 0.0;

  // Median over seeds of the per-seed middle-window cosine.
  static double middle_cosine(const MethodDiagnostics& m);
  // Half-open index range of the middle 80% of `n` cosine entries.
  static std::pair<std::size_t, std::size_t> middle_window(std::size_t n);
};

DiagnosticsBundle run_diagnostics(const RunConfig& config, const Progress& progress = {});

// Writes every table/figure of a bundle into `dir` and returns the file names.
std::vector<std::string> write_diagnostics(const DiagnosticsBundle& bundle,
                                           const std::string& dir, bool svg);

}  // namespace mgs
