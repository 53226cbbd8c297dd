#include "mgs/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "mgs/exact.hpp"
#include "mgs/svg.hpp"
#include "mgs/tables.hpp"

namespace mgs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void note(const Progress& progress, const std::string& msg) {
  if (progress) progress(msg);
}

std::string fmt(double v) { return format_double(v); }

double median_of(std::vector<double> v) { return percentile(std::move(v), 0.5); }

}  // namespace

Task build_task(const RunConfig& config) {
  const NoiseSchedule schedule = NoiseSchedule::build(config.schedule.kind, config.schedule.sigma_min,
                                                      config.schedule.sigma_max, config.schedule.T);
  ScoreModel model(config.prior, schedule);
  const auto& o = config.observation;
  if (o.kind == TaskKind::label) {
    ObservationModel obs = ObservationModel::classifier(config.prior);
    Condition cond = Condition::label(o.class_index);
    GmmPrior target = exact_posterior(config.prior, obs, cond);
    Vector x_true = o.x_true ? *o.x_true : config.prior.component(o.class_index).mean;
    return {std::move(model), GuidanceTask::measurement(std::move(obs), std::move(cond)),
            std::move(target), std::move(x_true)};
  }
  ObservationModel obs = ObservationModel::gaussian(o.op.build(config.prior.dim()), o.noise_std);
  Condition cond = o.y ? Condition::measurement(*o.y) : obs.observe(*o.x_true, o.seed);
  GmmPrior target = exact_posterior(config.prior, obs, cond);
  Vector x_true;
  if (o.x_true) {
    x_true = *o.x_true;
  } else {
    x_true = Vector::Zero(config.prior.dim());
    for (const auto& c : target.components()) x_true += c.weight * c.mean;
  }
  return {std::move(model), GuidanceTask::measurement(std::move(obs), std::move(cond)),
          std::move(target), std::move(x_true)};
}

SamplerConfig make_sampler_config(const RunConfig& config, const MethodConfig& method, double zeta,
                                  std::uint64_t seed, int steps, StepRule rule) {
  const NoiseSchedule schedule = NoiseSchedule::build(config.schedule.kind, config.schedule.sigma_min,
                                                      config.schedule.sigma_max, config.schedule.T);
  SamplerConfig s;
  s.rule = rule;
  s.mode = method.mode;
  s.grid = TimestepGrid::uniform(schedule, steps);
  s.adam = method.adam;
  s.rho = method.rho;
  s.rho_schedule = method.rho_schedule;
  s.likelihood = method.likelihood;
  s.record = RecordLevel::none;
  // Chain c of a cell uses streams (seed << 32) + c; the injector stream sets
  // the top bit so the two never collide.
  s.seed = (seed << 32) + config.seed;
  s.injector.zeta = zeta;
  s.injector.seed = config.injector_seed ? *config.injector_seed : (s.seed | (1ULL << 63));
  s.validate();
  return s;
}

HistogramSpec histogram_spec(const RunConfig& config) {
  HistogramSpec spec = HistogramSpec::around(config.prior, config.metrics.span, config.metrics.bins);
  spec.alpha = config.metrics.alpha;
  spec.reverse = config.metrics.reverse;
  spec.subdivisions = config.metrics.subdivisions;
  spec.validate();
  return spec;
}

KlEstimate cell_kl(const RunConfig& config, const Task& task, const SamplerConfig& sampler,
                   int chains) {
  const auto trajectories = run_batch(task.model, task.guidance, sampler, chains, config.jobs);
  const auto samples = final_samples(trajectories);
  const HistogramSpec spec = histogram_spec(config);
  const GmmPrior& target = sampler.mode == GuidanceMode::none ? task.model.prior() : task.target;
  const NoisedMixture density(target, 0.0);
  return grid_kl(samples, [&](const Vector& x) { return density.log_density(x); }, spec);
}

double KlTable::median(const std::string& method, double zeta) const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.method == method && r.zeta == zeta) v.push_back(r.kl);
  }
  return median_of(std::move(v));
}

double KlTable::median(const std::string& method, double zeta, int steps, StepRule rule) const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.method == method && r.zeta == zeta && r.steps == steps && r.rule == rule) v.push_back(r.kl);
  }
  return median_of(std::move(v));
}

std::string KlTable::to_csv(const std::string& table) const {
  std::ostringstream out;
  CsvWriter w(out, table,
              {"method", "zeta", "seed", "steps", "rule", "beta1", "beta2", "rho", "kl", "clamped"});
  for (const auto& r : rows) {
    w.cell(r.method).cell(r.zeta).cell(r.seed).cell(r.steps).cell(to_string(r.rule)).cell(r.beta1)
        .cell(r.beta2).cell(r.rho).cell(r.kl).cell(r.clamped);
    w.end_row();
  }
  return out.str();
}

namespace {

// Calibration is a pure function of everything below, so repeated drivers in
// one process (sweep, ablations, diagnostics) share results.
std::string calibration_key(const RunConfig& config, const MethodConfig& method, int steps,
                            StepRule rule) {
  nlohmann::json j = to_json(config);
  for (const char* k : {"guidance", "methods", "ablation", "diagnose"}) j.erase(k);
  j["run"].erase("id");
  j["run"].erase("out_dir");
  j["run"].erase("jobs");
  j["run"].erase("chains");
  j["run"].erase("record");
  for (const char* k : {"zetas", "seeds", "methods", "chains"}) j["sweep"].erase(k);
  j["cell"] = {{"method", to_json(method)}, {"steps", steps}, {"rule", to_string(rule)}};
  return j.dump();
}

std::mutex calibration_mutex;
std::map<std::string, double> calibration_cache;

}  // namespace

double calibrate_rho(const RunConfig& config, const Task& task, const MethodConfig& method,
                     int steps, StepRule rule, const Progress& progress) {
  if (method.rho_grid.empty() || method.mode == GuidanceMode::none) return method.rho;
  const std::string key = calibration_key(config, method, steps, rule);
  {
    std::lock_guard lock(calibration_mutex);
    if (auto it = calibration_cache.find(key); it != calibration_cache.end()) {
      note(progress, "calibrate " + method.name + " steps=" + std::to_string(steps) + " rule=" +
                         to_string(rule) + " cached rho=" + fmt(it->second));
      return it->second;
    }
  }
  double best_rho = method.rho;
  double best = kInf;
  for (double rho : method.rho_grid) {
    MethodConfig m = method;
    m.rho = rho;
    std::vector<double> kls;
    for (auto seed : config.sweep.calibration_seeds) {
      try {
        const auto sc = make_sampler_config(config, m, 0.0, seed, steps, rule);
        kls.push_back(cell_kl(config, task, sc, config.sweep.calibration_chains).kl);
      } catch (const NumericalError&) {
        kls.push_back(kInf);  // diverged: never selected
      }
    }
    const double med = median_of(kls);
    note(progress, "calibrate " + method.name + " steps=" + std::to_string(steps) + " rule=" +
                       to_string(rule) + " rho=" + fmt(rho) + " kl=" + fmt(med));
    if (med < best) {
      best = med;
      best_rho = rho;
    }
  }
  std::lock_guard lock(calibration_mutex);
  calibration_cache[key] = best_rho;
  return best_rho;
}

namespace {

MethodConfig resolved(const RunConfig& config, const Task& task, MethodConfig m, int steps,
                      StepRule rule, const Progress& progress) {
  if (config.sweep.calibrate) m.rho = calibrate_rho(config, task, m, steps, rule, progress);
  return m;
}

KlRow make_row(const MethodConfig& m, double zeta, std::uint64_t seed, int steps, StepRule rule,
               const KlEstimate& kl) {
  KlRow r;
  r.method = m.name;
  r.zeta = zeta;
  r.seed = seed;
  r.steps = steps;
  r.rule = rule;
  r.beta1 = is_adam(m.mode) ? m.adam.beta1 : kNaN;
  r.beta2 = is_adam(m.mode) ? m.adam.beta2 : kNaN;
  r.rho = m.rho;
  r.kl = kl.kl;
  r.clamped = kl.clamped;
  return r;
}

void run_cells(const RunConfig& config, const Task& task, const MethodConfig& m, double zeta,
               int steps, StepRule rule, KlTable& table, const Progress& progress) {
  for (auto seed : config.sweep.seeds) {
    const auto sc = make_sampler_config(config, m, zeta, seed, steps, rule);
    const KlEstimate kl = cell_kl(config, task, sc, config.sweep.chains);
    table.rows.push_back(make_row(m, zeta, seed, steps, rule, kl));
    note(progress, m.name + " zeta=" + fmt(zeta) + " steps=" + std::to_string(steps) + " rule=" +
                       to_string(rule) + " seed=" + std::to_string(seed) + " kl=" + fmt(kl.kl));
  }
}

}  // namespace

KlTable run_zeta_sweep(const RunConfig& config, const Progress& progress) {
  const Task task = build_task(config);
  const int steps = config.schedule.steps;
  const StepRule rule = config.schedule.rule;
  std::vector<MethodConfig> methods;
  KlTable table;
  for (const auto& name : config.sweep.methods) {
    methods.push_back(resolved(config, task, config.method(name), steps, rule, progress));
    table.rho[name] = methods.back().rho;
  }
  for (double zeta : config.sweep.zetas) {
    for (const auto& m : methods) run_cells(config, task, m, zeta, steps, rule, table, progress);
  }
  return table;
}

KlTable run_beta_ablation(const RunConfig& config, const Progress& progress) {
  const Task task = build_task(config);
  const int steps = config.schedule.steps;
  const StepRule rule = config.schedule.rule;
  const MethodConfig& adam = config.method("adam-dps");
  std::vector<MethodConfig> variants{config.method("dps"), adam};
  MethodConfig no_b1 = adam;
  no_b1.name = "adam-dps-beta1-0";
  no_b1.adam.beta1 = 0.0;
  MethodConfig no_b2 = adam;
  no_b2.name = "adam-dps-beta2-0";
  no_b2.adam.beta2 = 0.0;
  variants.push_back(no_b1);
  variants.push_back(no_b2);

  KlTable table;
  for (auto& v : variants) {
    const bool variant = v.name == no_b1.name || v.name == no_b2.name;
    if (variant && !config.ablation.recalibrate_variants) {
      v.rho = table.rho.at(adam.name);
    } else {
      v = resolved(config, task, v, steps, rule, progress);
    }
    table.rho[v.name] = v.rho;
  }
  for (const auto& v : variants) run_cells(config, task, v, config.ablation.zeta, steps, rule, table, progress);
  return table;
}

std::map<std::string, double> relative_improvement(const KlTable& table, double zeta) {
  std::map<std::string, double> out;
  const double base = table.median("dps", zeta);
  for (const auto& [name, rho] : table.rho) {
    if (name == "dps") continue;
    out[name] = (base - table.median(name, zeta)) / base;
  }
  return out;
}

KlTable run_step_budget_ablation(const RunConfig& config, const Progress& progress) {
  const Task task = build_task(config);
  KlTable table;
  for (int steps : config.ablation.budgets) {
    for (StepRule rule : config.ablation.rules) {
      for (const auto& name : config.sweep.methods) {
        const MethodConfig m = resolved(config, task, config.method(name), steps, rule, progress);
        table.rho[name + "@" + std::to_string(steps) + "-" + to_string(rule)] = m.rho;
        run_cells(config, task, m, config.ablation.zeta, steps, rule, table, progress);
      }
    }
  }
  return table;
}

std::pair<std::size_t, std::size_t> DiagnosticsBundle::middle_window(std::size_t n) {
  const auto lo = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(n)));
  const auto hi = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
  return {lo, std::max(lo, std::min(hi, n))};
}

double DiagnosticsBundle::middle_cosine(const MethodDiagnostics& m) {
  return median_of(m.middle_cosine);
}

DiagnosticsBundle run_diagnostics(const RunConfig& config, const Progress& progress) {
  if (!config.diagnose.pair) {
    throw ConfigError("diagnose.pair", "diagnostics need two paired methods, e.g. pair = [\"dps\", \"adam-dps\"]");
  }
  const Task task = build_task(config);
  const int steps = config.schedule.steps;
  const StepRule rule = config.schedule.rule;
  DiagnosticsBundle out;
  out.zeta = config.diagnose.zeta;

  auto run_method = [&](const std::string& name) {
    MethodDiagnostics d;
    const MethodConfig m = resolved(config, task, config.method(name), steps, rule, progress);
    d.method = name;
    d.rho = m.rho;
    std::vector<std::vector<double>> all_cos, all_loss;
    for (std::size_t si = 0; si < config.diagnose.seeds.size(); ++si) {
      const auto seed = config.diagnose.seeds[si];
      SamplerConfig sc = make_sampler_config(config, m, out.zeta, seed, steps, rule);
      sc.record = RecordLevel::scalars;
      const auto chains = run_batch(task.model, task.guidance, sc, config.diagnose.chains, config.jobs);
      std::vector<std::vector<double>> cos;
      std::vector<double> window;
      for (const auto& c : chains) {
        cos.push_back(sequential_cosine(c));
        const auto [lo, hi] = DiagnosticsBundle::middle_window(cos.back().size());
        for (std::size_t i = lo; i < hi; ++i) window.push_back(cos.back()[i]);
        std::vector<double> loss;
        for (const auto& r : c.records) loss.push_back(r.loss);
        all_loss.push_back(std::move(loss));
      }
      d.cosines.push_back(band("cosine", cos).median);
      d.middle_cosine.push_back(median_of(window));
      all_cos.insert(all_cos.end(), cos.begin(), cos.end());
      if (si == 0) {
        if (out.timesteps.empty()) {
          for (std::size_t i = 0; i + 1 < chains.front().records.size(); ++i) {
            out.timesteps.push_back(chains.front().records[i].t);
          }
        }
        SamplerConfig full = sc;
        full.record = RecordLevel::full;
        for (int k = 0; k < std::min(config.diagnose.trajectories, config.diagnose.chains); ++k) {
          d.recorded.push_back(sample_chain(task.model, task.guidance, full, k));
        }
      }
      note(progress, "diagnose " + name + " seed=" + std::to_string(seed) +
                         " middle-cosine=" + fmt(d.middle_cosine.back()));
    }
    d.cosine = band("cosine", all_cos);
    d.loss = band("loss", all_loss);
    return d;
  };
  out.a = run_method(config.diagnose.pair->first);
  out.b = run_method(config.diagnose.pair->second);
  if (!out.a.recorded.empty() && !out.b.recorded.empty() && task.x_true.size() == task.model.dim()) {
    try {
      out.projection = project_trajectories(out.a.recorded.front(), out.b.recorded.front(), task.x_true);
    } catch (const ProjectionDegenerateError& e) {
      note(progress, std::string("projection skipped: ") + e.what());
    }
  }
  return out;
}

std::vector<std::string> write_diagnostics(const DiagnosticsBundle& bundle, const std::string& dir,
                                           bool svg) {
  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_artifact(dir, name, text);
    files.push_back(name);
  };
  const std::vector<const MethodDiagnostics*> both{&bundle.a, &bundle.b};

  auto series_csv = [&](const std::string& table, auto get) {
    std::ostringstream o;
    CsvWriter w(o, table, {"method", "step", "p25", "median", "p75"});
    for (const auto* m : both) {
      const DiagnosticSeries& s = get(*m);
      for (std::size_t i = 0; i < s.median.size(); ++i) {
        w.cell(m->method).cell(static_cast<std::int64_t>(i)).cell(s.p25[i]).cell(s.median[i]).cell(s.p75[i]);
        w.end_row();
      }
    }
    return o.str();
  };
  emit("cosine_band.csv", series_csv("cosine-band", [](const MethodDiagnostics& m) -> const DiagnosticSeries& { return m.cosine; }));
  emit("loss_band.csv", series_csv("loss-band", [](const MethodDiagnostics& m) -> const DiagnosticSeries& { return m.loss; }));

  {
    std::ostringstream o;
    CsvWriter w(o, "cosine-by-seed", {"method", "seed_index", "step", "median"});
    for (const auto* m : both) {
      for (std::size_t s = 0; s < m->cosines.size(); ++s) {
        for (std::size_t i = 0; i < m->cosines[s].size(); ++i) {
          w.cell(m->method).cell(static_cast<std::int64_t>(s)).cell(static_cast<std::int64_t>(i))
              .cell(m->cosines[s][i]);
          w.end_row();
        }
      }
    }
    emit("cosine_by_seed.csv", o.str());
  }
  {
    std::ostringstream o;
    CsvWriter w(o, "cosine-summary", {"method", "seed_index", "middle_cosine", "rho"});
    for (const auto* m : both) {
      for (std::size_t s = 0; s < m->middle_cosine.size(); ++s) {
        w.cell(m->method).cell(static_cast<std::int64_t>(s)).cell(m->middle_cosine[s]).cell(m->rho);
        w.end_row();
      }
    }
    emit("cosine_summary.csv", o.str());
  }
  {
    std::ostringstream o;
    int d = 0;
    for (const auto* m : both) {
      for (const auto& t : m->recorded) d = std::max(d, static_cast<int>(t.initial.size()));
    }
    const int shown = std::min(d, 8);
    std::vector<std::string> cols{"method", "chain", "step", "t"};
    for (int i = 0; i < shown; ++i) cols.push_back("x0_" + std::to_string(i));
    CsvWriter w(o, "x0-snapshots", cols);
    for (const auto* m : both) {
      for (const auto& t : m->recorded) {
        for (std::size_t s = 0; s < t.records.size(); ++s) {
          w.cell(m->method).cell(t.chain).cell(static_cast<std::int64_t>(s)).cell(t.records[s].t);
          for (int i = 0; i < shown; ++i) w.cell(t.records[s].x0[i]);
          w.end_row();
        }
      }
    }
    emit("x0_snapshots.csv", o.str());
  }
  if (bundle.projection) {
    const Projection& p = *bundle.projection;
    std::ostringstream o;
    CsvWriter w(o, "projection", {"method", "index", "x", "y"});
    for (const auto& [name, pts] : {std::pair{bundle.a.method, &p.a}, std::pair{bundle.b.method, &p.b}}) {
      for (std::size_t i = 0; i < pts->size(); ++i) {
        w.cell(name).cell(static_cast<std::int64_t>(i)).cell((*pts)[i].x).cell((*pts)[i].y);
        w.end_row();
      }
    }
    emit("projection.csv", o.str());
    std::ostringstream c;
    CsvWriter cw(c, "projection-contour", {"x", "y", "mse"});
    for (const auto& s : p.contour) {
      cw.cell(s.x).cell(s.y).cell(s.mse);
      cw.end_row();
    }
    emit("projection_contour.csv", c.str());
  }

  if (svg) {
    auto band_plot = [&](const std::string& title, const std::string& ylabel, auto get) {
      SvgPlot plot{title, "sampling step", ylabel, {}};
      for (const auto* m : both) {
        const DiagnosticSeries& s = get(*m);
        SvgSeries ser{m->method, {}, s.median, s.p25, s.p75, false};
        for (std::size_t i = 0; i < s.median.size(); ++i) ser.x.push_back(static_cast<double>(i));
        plot.series.push_back(std::move(ser));
      }
      return render_svg(plot);
    };
    emit("cosine.svg", band_plot("Sequential guidance cosine", "cosine",
                                 [](const MethodDiagnostics& m) -> const DiagnosticSeries& { return m.cosine; }));
    emit("loss.svg", band_plot("Guidance loss", "loss",
                               [](const MethodDiagnostics& m) -> const DiagnosticSeries& { return m.loss; }));
    if (bundle.projection) {
      SvgPlot plot{"Trajectory projection", "solution difference axis", "start-to-target axis", {}};
      for (const auto& [name, pts] :
           {std::pair{bundle.a.method, &bundle.projection->a}, std::pair{bundle.b.method, &bundle.projection->b}}) {
        SvgSeries s{name, {}, {}, {}, {}, false};
        for (const auto& q : *pts) {
          s.x.push_back(q.x);
          s.y.push_back(q.y);
        }
        plot.series.push_back(std::move(s));
      }
      plot.series.push_back({"target", {0.0}, {0.0}, {}, {}, true});
      emit("projection.svg", render_svg(plot));
    }
  }
  return files;
}

}  // namespace mgs
