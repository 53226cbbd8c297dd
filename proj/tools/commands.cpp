#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mgs/config.hpp"
#include "mgs/errors.hpp"
#include "mgs/experiments.hpp"
#include "mgs/gradcheck.hpp"
#include "mgs/svg.hpp"
#include "mgs/tables.hpp"
#include "mgs/toml_lite.hpp"

namespace mgs::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_zetas(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split(s)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ConfigError("--zeta", "'" + tok + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--zeta", "no values given");
  return out;
}

json read_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot read configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  try {
    if (is_json) return json::parse(ss.str());
    return parse_toml_lite(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path, e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(e.field(), std::string(e.what()) + " (in " + path + ")");
  }
}

double single_zeta(const Overrides& o) {
  const auto z = parse_zetas(*o.zeta);
  if (z.size() != 1) throw ConfigError("--zeta", "this command takes a single value");
  return z.front();
}

std::vector<std::string> target_methods(const RunConfig& cfg, const std::string& command) {
  if (command == "diagnose") {
    if (cfg.diagnose.pair) return {cfg.diagnose.pair->first, cfg.diagnose.pair->second};
    return {};
  }
  std::vector<std::string> names = cfg.sweep.methods;
  if (command == "ablate") {
    for (const char* n : {"dps", "adam-dps"}) {
      if (std::find(names.begin(), names.end(), n) == names.end()) names.emplace_back(n);
    }
  }
  return names;
}

fs::path output_dir(const Overrides& o, const RunConfig& cfg) {
  std::string root;
  if (o.out) {
    root = *o.out;
  } else if (const char* env = std::getenv("MGS_OUT_DIR"); env && *env) {
    root = env;
  } else if (!cfg.out_dir.empty()) {
    root = cfg.out_dir;
  } else {
    root = "results";
  }
  return fs::path(root) / cfg.id;
}

class Reporter {
 public:
  Reporter(const std::string& command, const RunConfig& cfg, fs::path dir)
      : command_(command), cfg_(cfg), dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {}

  void file(const std::string& name, const std::string& content) {
    write_artifact(dir_, name, content);
    files_.push_back(name);
  }
  void files(const std::vector<std::string>& names) { files_.insert(files_.end(), names.begin(), names.end()); }

  json& results() { return results_; }

  void finish(std::ostream& out) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m;
    m["command"] = command_;
    m["config"] = to_json(cfg_);
    m["csv_schema"] = kCsvSchemaVersion;
    m["seeds"] = {{"run", cfg_.seed},
                  {"chain_stream", "(cell_seed << 32) + run.seed + chain"},
                  {"injector_stream", "chain_stream | 2^63"}};
    m["results"] = results_;
    m["wall_clock_seconds"] = secs;
    files_.push_back("manifest.json");
    m["files"] = files_;
    write_artifact(dir_, "manifest.json", m.dump(2) + "\n");
    out << "wrote " << files_.size() << " files to " << dir_.string() << "\n";
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> files_;
  json results_ = json::object();
};

Progress progress_to(std::ostream& err, bool quiet) {
  if (quiet) return {};
  return [&err](const std::string& msg) { err << msg << '\n'; };
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

RunConfig resolve(const Overrides& o, const std::string& command) {
  return run_config_from_json(resolve_document(o, command));
}

std::string sweep_svg(const KlTable& table, const RunConfig& cfg) {
  SvgPlot plot{"KL to the exact posterior", "zeta", "KL (nats)", {}};
  for (const auto& name : cfg.sweep.methods) {
    SvgSeries s{name, {}, {}, {}, {}, false};
    for (double z : cfg.sweep.zetas) {
      std::vector<double> v;
      for (const auto& r : table.rows) {
        if (r.method == name && r.zeta == z) v.push_back(r.kl);
      }
      s.x.push_back(z);
      s.y.push_back(percentile(v, 0.5));
      s.lo.push_back(percentile(v, 0.25));
      s.hi.push_back(percentile(v, 0.75));
    }
    plot.series.push_back(std::move(s));
  }
  return render_svg(plot);
}

}  // namespace

json resolve_document(const Overrides& o, const std::string& command) {
  json doc = o.config_path ? read_document(*o.config_path) : to_json(default_run_config());
  if (!doc.is_object()) throw ConfigError("", "configuration must be a table");
  auto section = [&](const char* name) -> json& {
    json& s = doc[name];
    if (s.is_null()) s = json::object();
    return s;
  };

  if (o.seed) section("run")["seed"] = *o.seed;
  if (o.jobs) section("run")["jobs"] = *o.jobs;
  if (o.kind) section("ablation")["kind"] = *o.kind;

  if (command == "sample") {
    if (o.method) {
      json& g = section("guidance");
      for (const char* k : {"mode", "rho", "rho_schedule", "likelihood", "beta1", "beta2", "delta", "rho_grid"}) {
        g.erase(k);
      }
      g["method"] = *o.method;
    }
    if (o.zeta) section("guidance")["zeta"] = single_zeta(o);
    if (o.rho) section("guidance")["rho"] = *o.rho;
    if (o.beta1) section("guidance")["beta1"] = *o.beta1;
    if (o.beta2) section("guidance")["beta2"] = *o.beta2;
    if (o.chains) section("run")["chains"] = *o.chains;
    if (o.steps) section("schedule")["steps"] = *o.steps;
    if (o.rule) section("schedule")["rule"] = *o.rule;
    return doc;
  }

  if (o.method) {
    const auto names = split(*o.method);
    if (command == "diagnose") {
      section("diagnose")["pair"] = names;
    } else {
      section("sweep")["methods"] = names;
    }
  }
  if (o.zeta) {
    if (command == "sweep") {
      section("sweep")["zetas"] = parse_zetas(*o.zeta);
    } else if (command == "ablate") {
      section("ablation")["zeta"] = single_zeta(o);
    } else if (command == "diagnose") {
      section("diagnose")["zeta"] = single_zeta(o);
    }
  }
  if (o.chains) (command == "diagnose" ? section("diagnose") : section("sweep"))["chains"] = *o.chains;
  const bool steps_ablation = command == "ablate" && doc.value("/ablation/kind"_json_pointer, std::string("beta")) == "steps";
  if (o.steps) {
    if (steps_ablation) {
      section("ablation")["budgets"] = json::array({*o.steps});
    } else {
      section("schedule")["steps"] = *o.steps;
    }
  }
  if (o.rule) {
    if (steps_ablation) {
      section("ablation")["rules"] = json::array({*o.rule});
    } else {
      section("schedule")["rule"] = *o.rule;
    }
  }
  if (o.rho || o.beta1 || o.beta2) {
    // Method-level knobs go to every method the command runs.
    const RunConfig base = run_config_from_json(doc);
    for (const auto& name : target_methods(base, command)) {
      json& m = section("methods")[name];
      if (m.is_null()) m = json::object();
      const bool adam = is_adam(base.method(name).mode);
      if (o.rho) m["rho"] = *o.rho;
      if (o.beta1 && adam) m["beta1"] = *o.beta1;
      if (o.beta2 && adam) m["beta2"] = *o.beta2;
    }
    if (o.rho) section("sweep")["calibrate"] = false;
  }
  return doc;
}

int cmd_sample(const Overrides& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve(o, "sample");
    Reporter rep("sample", cfg, output_dir(o, cfg));
    const Task task = build_task(cfg);
    SamplerConfig sc = make_sampler_config(cfg, cfg.guidance, cfg.zeta, 0, cfg.schedule.steps, cfg.schedule.rule);
    sc.record = cfg.record;
    const auto chains = run_batch(task.model, task.guidance, sc, cfg.chains, cfg.jobs);

    std::ostringstream traj;
    write_trajectory_csv(traj, chains);
    rep.file("trajectory.csv", traj.str());

    std::ostringstream samples;
    std::vector<std::string> cols{"chain"};
    for (int i = 0; i < task.model.dim(); ++i) cols.push_back("x" + std::to_string(i));
    CsvWriter w(samples, "samples", cols);
    for (const auto& c : chains) {
      w.cell(c.chain);
      for (int i = 0; i < task.model.dim(); ++i) w.cell(c.final_sample[i]);
      w.end_row();
    }
    rep.file("samples.csv", samples.str());

    rep.results()["chains"] = cfg.chains;
    rep.results()["grid_length"] = sc.grid.size();
    rep.results()["method"] = cfg.guidance.name;
    rep.results()["mode"] = to_string(cfg.guidance.mode);
    if (task.model.dim() == 2 && cfg.chains >= 2) {
      const HistogramSpec spec = histogram_spec(cfg);
      const GmmPrior& target = sc.mode == GuidanceMode::none ? task.model.prior() : task.target;
      const NoisedMixture density(target, 0.0);
      const auto fs = final_samples(chains);
      const KlEstimate kl = grid_kl(fs, [&](const Vector& x) { return density.log_density(x); }, spec);
      rep.results()["kl"] = kl.kl;
      rep.results()["kl_target"] = sc.mode == GuidanceMode::none ? "prior" : "posterior";
      out << "kl=" << format_double(kl.kl) << " (" << kl.clamped << " clamped)\n";
    }
    rep.finish(out);
    return 0;
  });
}

int cmd_sweep(const Overrides& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve(o, "sweep");
    Reporter rep("sweep", cfg, output_dir(o, cfg));
    const KlTable table = run_zeta_sweep(cfg, progress_to(err, o.quiet));
    rep.file("kl.csv", table.to_csv("zeta-sweep"));

    std::ostringstream summary;
    CsvWriter w(summary, "zeta-sweep-summary", {"method", "zeta", "median_kl", "rho"});
    for (double z : cfg.sweep.zetas) {
      for (const auto& m : cfg.sweep.methods) {
        const double med = table.median(m, z);
        w.cell(m).cell(z).cell(med).cell(table.rho.at(m));
        w.end_row();
        rep.results()["median_kl"][m].push_back({z, med});
        out << m << " zeta=" << format_double(z) << " median_kl=" << format_double(med) << '\n';
      }
    }
    rep.file("summary.csv", summary.str());
    rep.file("sweep.svg", sweep_svg(table, cfg));
    rep.results()["rho"] = table.rho;
    rep.finish(out);
    return 0;
  });
}

int cmd_ablate(const Overrides& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve(o, "ablate");
    Reporter rep("ablate", cfg, output_dir(o, cfg));
    const auto progress = progress_to(err, o.quiet);
    if (cfg.ablation.kind == AblationKind::beta) {
      const KlTable table = run_beta_ablation(cfg, progress);
      rep.file("beta_ablation.csv", table.to_csv("beta-ablation"));
      const auto rel = relative_improvement(table, cfg.ablation.zeta);
      std::ostringstream summary;
      CsvWriter w(summary, "beta-ablation-summary", {"method", "median_kl", "improvement_over_dps", "rho"});
      for (const auto& [name, rho] : table.rho) {
        const double med = table.median(name, cfg.ablation.zeta);
        const double imp = name == "dps" ? 0.0 : rel.at(name);
        w.cell(name).cell(med).cell(imp).cell(rho);
        w.end_row();
        rep.results()["median_kl"][name] = med;
        out << name << " median_kl=" << format_double(med) << " improvement_over_dps=" << format_double(imp) << '\n';
      }
      rep.results()["relative_improvement"] = rel;
      rep.file("summary.csv", summary.str());
    } else {
      const KlTable table = run_step_budget_ablation(cfg, progress);
      rep.file("step_budget.csv", table.to_csv("step-budget"));
      std::ostringstream summary;
      CsvWriter w(summary, "step-budget-summary", {"method", "steps", "rule", "median_kl"});
      for (int steps : cfg.ablation.budgets) {
        for (StepRule rule : cfg.ablation.rules) {
          for (const auto& m : cfg.sweep.methods) {
            const double med = table.median(m, cfg.ablation.zeta, steps, rule);
            w.cell(m).cell(steps).cell(to_string(rule)).cell(med);
            w.end_row();
            out << m << " steps=" << steps << " rule=" << to_string(rule) << " median_kl=" << format_double(med) << '\n';
          }
        }
      }
      rep.file("summary.csv", summary.str());
      rep.results()["rho"] = table.rho;
    }
    rep.finish(out);
    return 0;
  });
}

int cmd_diagnose(const Overrides& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve(o, "diagnose");
    if (!cfg.diagnose.pair) {
      throw ConfigError("diagnose.pair", "missing; name the two methods to compare, e.g. pair = [\"dps\", \"adam-dps\"]");
    }
    const fs::path dir = output_dir(o, cfg);
    Reporter rep("diagnose", cfg, dir);
    const DiagnosticsBundle b = run_diagnostics(cfg, progress_to(err, o.quiet));
    rep.files(write_diagnostics(b, dir.string(), cfg.diagnose.svg));
    for (const auto* m : {&b.a, &b.b}) {
      const double mc = DiagnosticsBundle::middle_cosine(*m);
      rep.results()["middle_cosine"][m->method] = mc;
      rep.results()["rho"][m->method] = m->rho;
      out << m->method << " middle_cosine=" << format_double(mc) << '\n';
    }
    rep.finish(out);
    return 0;
  });
}

int cmd_gradcheck(const Overrides& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve(o, "gradcheck");
    Reporter rep("gradcheck", cfg, output_dir(o, cfg));
    const auto results = run_gradchecks(cfg, 100, cfg.seed + 7);
    std::ostringstream csv;
    CsvWriter w(csv, "gradcheck", {"check", "points", "max_rel_error", "tolerance", "passed"});
    const GradcheckResult* worst = nullptr;
    for (const auto& r : results) {
      w.cell(r.name).cell(r.points).cell(r.max_rel_error).cell(r.tolerance).cell(r.passed() ? "true" : "false");
      w.end_row();
      out << (r.passed() ? "ok   " : "FAIL ") << r.name << " points=" << r.points
          << " max_rel_error=" << format_double(r.max_rel_error) << " tol=" << format_double(r.tolerance) << '\n';
      rep.results()[r.name] = {{"max_rel_error", r.max_rel_error}, {"tolerance", r.tolerance}};
      const double ratio = r.max_rel_error / r.tolerance;
      if (!worst || ratio > worst->max_rel_error / worst->tolerance) worst = &r;
    }
    rep.file("gradcheck.csv", csv.str());
    rep.finish(out);
    if (worst && !worst->passed()) {
      err << "worst offender: " << worst->name << " max_rel_error=" << format_double(worst->max_rel_error)
          << " exceeds " << format_double(worst->tolerance) << '\n';
      return 1;
    }
    return 0;
  });
}

}  // namespace mgs::cli
