#include "mgs/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "mgs/exact.hpp"

namespace mgs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table,
             const char* field) {
  for (const auto& [name, v] : table) {
    if (s == name) return v;
  }
  throw ConfigError(field, "unknown value '" + s + "'");
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0 || a.size() != b.size()) return kNaN;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace

std::string to_string(StepRule v) { return v == StepRule::ddpm_ancestral ? "ddpm" : "ddim"; }

std::string to_string(GuidanceMode v) {
  switch (v) {
    case GuidanceMode::none: return "none";
    case GuidanceMode::dps: return "dps";
    case GuidanceMode::adam_dps: return "adam-dps";
    case GuidanceMode::cg: return "cg";
    case GuidanceMode::adam_cg: return "adam-cg";
  }
  return "?";
}

std::string to_string(RhoSchedule v) {
  switch (v) {
    case RhoSchedule::constant: return "constant";
    case RhoSchedule::relative: return "relative";
    case RhoSchedule::variance: return "variance";
  }
  return "?";
}

std::string to_string(LikelihoodSource v) {
  switch (v) {
    case LikelihoodSource::dps: return "dps";
    case LikelihoodSource::dps_frozen_jacobian: return "dps-frozen-jacobian";
    case LikelihoodSource::exact: return "exact";
  }
  return "?";
}

std::string to_string(RecordLevel v) {
  switch (v) {
    case RecordLevel::none: return "none";
    case RecordLevel::scalars: return "scalars";
    case RecordLevel::full: return "full";
  }
  return "?";
}

StepRule step_rule_from_string(const std::string& s) {
  return parse_enum<StepRule>(s,
                              {{"ddpm", StepRule::ddpm_ancestral},
                               {"ddpm-ancestral", StepRule::ddpm_ancestral},
                               {"ddim", StepRule::ddim_deterministic},
                               {"ddim-deterministic", StepRule::ddim_deterministic}},
                              "rule");
}

GuidanceMode guidance_mode_from_string(const std::string& s) {
  return parse_enum<GuidanceMode>(s,
                                  {{"none", GuidanceMode::none},
                                   {"dps", GuidanceMode::dps},
                                   {"adam-dps", GuidanceMode::adam_dps},
                                   {"cg", GuidanceMode::cg},
                                   {"adam-cg", GuidanceMode::adam_cg}},
                                  "mode");
}

RhoSchedule rho_schedule_from_string(const std::string& s) {
  return parse_enum<RhoSchedule>(s,
                                 {{"constant", RhoSchedule::constant},
                                  {"relative", RhoSchedule::relative},
                                  {"variance", RhoSchedule::variance}},
                                 "rho_schedule");
}

LikelihoodSource likelihood_source_from_string(const std::string& s) {
  return parse_enum<LikelihoodSource>(s,
                                      {{"dps", LikelihoodSource::dps},
                                       {"dps-frozen-jacobian", LikelihoodSource::dps_frozen_jacobian},
                                       {"exact", LikelihoodSource::exact}},
                                      "likelihood");
}

RecordLevel record_level_from_string(const std::string& s) {
  return parse_enum<RecordLevel>(s,
                                 {{"none", RecordLevel::none},
                                  {"scalars", RecordLevel::scalars},
                                  {"full", RecordLevel::full}},
                                 "record");
}

bool is_adam(GuidanceMode m) { return m == GuidanceMode::adam_dps || m == GuidanceMode::adam_cg; }
bool is_dps(GuidanceMode m) { return m == GuidanceMode::dps || m == GuidanceMode::adam_dps; }
bool is_cg(GuidanceMode m) { return m == GuidanceMode::cg || m == GuidanceMode::adam_cg; }

double SamplerConfig::rho_at(double sigma_t, double sigma_s) const {
  switch (rho_schedule) {
    case RhoSchedule::constant: return rho;
    case RhoSchedule::relative: return rho * (sigma_t - sigma_s) * (sigma_t + sigma_s) / (sigma_t * sigma_t);
    case RhoSchedule::variance: return rho * (sigma_t - sigma_s) * (sigma_t + sigma_s);
  }
  return rho;
}

void SamplerConfig::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("rho", "must be finite and >= 0");
  injector.validate();
  if (is_adam(mode)) adam.validate();
}

Vector ancestral_mean(const Vector& x0, const Vector& x_t, double sigma_t, double sigma_s) {
  return x0 + (sigma_s * sigma_s / (sigma_t * sigma_t)) * (x_t - x0);
}

double ancestral_std(double sigma_t, double sigma_s) {
  return sigma_s * std::sqrt(std::max(0.0, (sigma_t - sigma_s) * (sigma_t + sigma_s))) / sigma_t;
}

Vector ancestral_step(const ScoreModel& model, const Vector& x_t, int t, int s, const Vector& eps) {
  if (s >= t) throw OrderingError("ancestral_step needs s < t");
  const double st = model.sigma(t);
  const double ss = model.sigma(s);
  require_dim(eps, model.dim(), "noise draw");
  const Vector x0 = model.tweedie_denoise(x_t, t);
  return ancestral_mean(x0, x_t, st, ss) + ancestral_std(st, ss) * eps;
}

Vector ancestral_step(const ScoreModel& model, const Vector& x_t, int t, int s, NormalSource& rng) {
  if (s >= t) throw OrderingError("ancestral_step needs s < t");
  return ancestral_step(model, x_t, t, s, rng.draw(model.dim()));
}

Vector ddim_step(const ScoreModel& model, const Vector& x_t, int t, int s) {
  if (s >= t) throw OrderingError("ddim_step needs s < t");
  const double st = model.sigma(t);
  const double ss = model.sigma(s);
  const Vector x0 = model.tweedie_denoise(x_t, t);
  return x0 + (ss / st) * (x_t - x0);
}

namespace {

void check_task(const ScoreModel& model, const GuidanceTask& task, const SamplerConfig& config) {
  config.validate();
  if (is_dps(config.mode)) {
    if (!task.observation || !task.condition) {
      throw ConfigError("observation", to_string(config.mode) + " needs an observation and a condition");
    }
    if (task.observation->input_dim() != model.dim()) {
      throw DimensionError("observation input dimension does not match the prior");
    }
    task.observation->validate(*task.condition);
  } else if (is_cg(config.mode)) {
    if (!task.condition || !task.condition->is_label()) {
      throw ConfigError("observation.class", to_string(config.mode) + " needs a class label");
    }
    if (model.prior().size() < 2) throw ClassificationError("classifier guidance needs >= 2 components");
    const int c = task.condition->class_index();
    if (c < 0 || c >= model.prior().size()) {
      throw ConfigError("observation.class", "class index " + std::to_string(c) + " out of range");
    }
  }
}

// Per-chain scratch so the step loop does not allocate for mixture evaluation.
class ChainRunner {
 public:
  ChainRunner(const ScoreModel& model, const GuidanceTask& task, const SamplerConfig& config)
      : model_(model), task_(task), config_(config), d_(model.dim()) {}

  Trajectory run(int chain) {
    const SamplerConfig& cfg = config_;
    const auto& grid = cfg.grid;
    NormalSource rng(cfg.seed + static_cast<std::uint64_t>(chain));
    NormalSource inj(cfg.injector.seed + static_cast<std::uint64_t>(chain));
    const bool guided = cfg.mode != GuidanceMode::none;
    const bool adam = is_adam(cfg.mode);
    const bool need_hessian = is_dps(cfg.mode) && cfg.likelihood == LikelihoodSource::dps;

    Trajectory traj;
    traj.chain = chain;
    if (cfg.record != RecordLevel::none) traj.records.reserve(static_cast<std::size_t>(grid.size()));

    Vector x = model_.sigma(grid[0]) * rng.draw(d_);
    traj.initial = x;
    MomentState state = reset_moments(d_);
    Vector x0(d_), mean(d_), prev_applied, applied(d_), g_hat(d_), jac;
    bool have_prev = false;

    for (int i = 0; i < grid.transitions(); ++i) {
      const int t = grid[i];
      const int s = grid[i + 1];
      const double st = model_.sigma(t);
      const double ss = model_.sigma(s);
      model_.at(t).evaluate(x, need_hessian, eval_);
      x0.noalias() = x + (st * st) * eval_.score;

      GuidanceTerm term;
      double rho_t = 0.0;
      if (guided) {
        term = guidance_term(x, x0, t, st);
        term = inject_noise(std::move(term), cfg.injector.zeta, inj);
        if (adam) {
          adaptive_moment_update(term.g, state, cfg.adam, g_hat);
        } else {
          g_hat = term.g;
        }
        rho_t = cfg.rho_at(st, ss);
      }

      // CG shifts the clean estimate handed to Sample; DPS adds after the draw.
      if (is_cg(cfg.mode)) x0 += (rho_t * st * st) * g_hat;
      if (cfg.rule == StepRule::ddpm_ancestral) {
        const double ratio = (ss * ss) / (st * st);
        mean.noalias() = x0 + ratio * (x - x0);
        const double sd = ancestral_std(st, ss);
        for (int k = 0; k < d_; ++k) mean[k] += sd * rng.draw();
      } else {
        mean.noalias() = x0 + (ss / st) * (x - x0);
      }
      if (is_dps(cfg.mode)) mean += rho_t * g_hat;

      if (cfg.record != RecordLevel::none) {
        StepRecord rec;
        rec.t = t;
        rec.sigma_t = st;
        rec.loss = guided ? term.loss : kNaN;
        rec.adam_k = state.k;
        rec.cos_prev = kNaN;
        if (guided) {
          if (have_prev) rec.cos_prev = cosine(g_hat, prev_applied);
          prev_applied = g_hat;
          have_prev = true;
        }
        if (cfg.record == RecordLevel::full) {
          rec.x_t = x;
          rec.x0 = x0;
          if (guided) {
            rec.g_raw = term.g;
            rec.g_hat = g_hat;
          }
        }
        traj.records.push_back(std::move(rec));
      }

      x.swap(mean);
      if (!x.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite state in chain " << chain << " at step " << i << " (t=" << t
            << " -> s=" << s << ", sigma_t=" << st << ", mode=" << to_string(cfg.mode)
            << ", rho_t=" << rho_t << ")";
        throw NumericalError(msg.str());
      }
    }

    if (cfg.record != RecordLevel::none) {
      const int t = grid[grid.size() - 1];
      StepRecord rec;
      rec.t = t;
      rec.sigma_t = model_.sigma(t);
      rec.cos_prev = kNaN;
      rec.adam_k = state.k;
      rec.loss = kNaN;
      if (guided) {
        const double st = rec.sigma_t;
        model_.at(t).evaluate(x, need_hessian, eval_);
        x0.noalias() = x + (st * st) * eval_.score;
        rec.loss = guidance_term(x, x0, t, st).loss;
      }
      if (cfg.record == RecordLevel::full) {
        rec.x_t = x;
        rec.x0 = x;
      }
      traj.records.push_back(std::move(rec));
    }
    traj.final_sample = std::move(x);
    return traj;
  }

 private:
  GuidanceTerm guidance_term(const Vector& x, const Vector& x0, int t, double st) {
    const SamplerConfig& cfg = config_;
    if (is_cg(cfg.mode)) return cg_term(eval_, task_.condition->class_index());
    const ObservationModel& obs = *task_.observation;
    const Condition& cond = *task_.condition;
    if (cfg.likelihood == LikelihoodSource::exact) {
      GuidanceTerm term;
      term.g = exact_likelihood_score(model_.at(t), model_.prior(), obs, cond, x);
      term.loss = obs.loss_and_gradient(x0, cond).loss;
      return term;
    }
    if (cfg.likelihood == LikelihoodSource::dps_frozen_jacobian) {
      return dps_term(obs, cond, x0, jac_, JacobianMode::frozen);
    }
    jac_.noalias() = (st * st) * eval_.hessian;
    jac_.diagonal().array() += 1.0;
    return dps_term(obs, cond, x0, jac_, JacobianMode::full);
  }

  const ScoreModel& model_;
  const GuidanceTask& task_;
  const SamplerConfig& config_;
  int d_;
  MixtureEval eval_;
  Matrix jac_;
};

}  // namespace

Trajectory sample_chain(const ScoreModel& model, const GuidanceTask& task,
                        const SamplerConfig& config, int chain) {
  check_task(model, task, config);
  return ChainRunner(model, task, config).run(chain);
}

Trajectory unconditional_chain(const ScoreModel& model, const SamplerConfig& config, int chain) {
  SamplerConfig c = config;
  c.mode = GuidanceMode::none;
  return sample_chain(model, GuidanceTask::none(), c, chain);
}

Trajectory dps_guided_chain(const ScoreModel& model, const ObservationModel& observation,
                            const Condition& condition, const SamplerConfig& config, int chain) {
  if (!is_dps(config.mode)) throw ConfigError("mode", "dps_guided_chain needs dps or adam-dps");
  return sample_chain(model, GuidanceTask::measurement(observation, condition), config, chain);
}

Trajectory cg_guided_chain(const ScoreModel& model, int class_index, const SamplerConfig& config,
                           int chain) {
  if (!is_cg(config.mode)) throw ConfigError("mode", "cg_guided_chain needs cg or adam-cg");
  return sample_chain(model, GuidanceTask::label(class_index), config, chain);
}

std::vector<Trajectory> run_batch(const ScoreModel& model, const GuidanceTask& task,
                                  const SamplerConfig& config, int n_chains, int jobs) {
  if (n_chains < 1) throw ConfigError("chains", "must be at least 1");
  if (jobs < 0) throw ConfigError("jobs", "must be >= 0");
  check_task(model, task, config);
  if (jobs == 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min(jobs, n_chains);

  std::vector<Trajectory> out(static_cast<std::size_t>(n_chains));
  auto work = [&](int begin, int end) {
    ChainRunner runner(model, task, config);
    for (int c = begin; c < end; ++c) out[static_cast<std::size_t>(c)] = runner.run(c);
  };
  if (jobs == 1) {
    work(0, n_chains);
    return out;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int j = 0; j < jobs; ++j) {
    const int begin = static_cast<int>(static_cast<long>(n_chains) * j / jobs);
    const int end = static_cast<int>(static_cast<long>(n_chains) * (j + 1) / jobs);
    threads.emplace_back([&, j, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(j)] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<Vector> final_samples(const std::vector<Trajectory>& chains) {
  std::vector<Vector> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.final_sample);
  return out;
}

}  // namespace mgs
