#include "mgs/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mgs/errors.hpp"
#include "mgs/toml_lite.hpp"

namespace mgs {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed accessors over one JSON object that report dotted field paths and
// reject unknown keys.
class Section {
 public:
  Section(const json* node, std::string path, std::set<std::string> allowed)
      : node_(node), path_(std::move(path)) {
    if (node_ == nullptr) return;
    if (!node_->is_object()) throw ConfigError(path_, "expected a table");
    for (const auto& [k, v] : node_->items()) {
      if (!allowed.count(k)) throw ConfigError(join(path_, k), "unknown field");
    }
  }

  bool has(const std::string& k) const { return node_ && node_->contains(k); }
  const json& raw(const std::string& k) const { return node_->at(k); }
  std::string field(const std::string& k) const { return join(path_, k); }

  double number(const std::string& k, double dflt) const {
    if (!has(k)) return dflt;
    return as_number(raw(k), field(k));
  }

  std::int64_t integer(const std::string& k, std::int64_t dflt) const {
    if (!has(k)) return dflt;
    return as_integer(raw(k), field(k));
  }

  bool boolean(const std::string& k, bool dflt) const {
    if (!has(k)) return dflt;
    if (!raw(k).is_boolean()) throw ConfigError(field(k), "expected true or false");
    return raw(k).get<bool>();
  }

  std::string string(const std::string& k, const std::string& dflt) const {
    if (!has(k)) return dflt;
    if (!raw(k).is_string()) throw ConfigError(field(k), "expected a string");
    return raw(k).get<std::string>();
  }

  std::vector<double> numbers(const std::string& k, std::vector<double> dflt) const {
    if (!has(k)) return dflt;
    const json& a = raw(k);
    if (!a.is_array()) throw ConfigError(field(k), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.push_back(as_number(a[i], field(k) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  std::vector<std::int64_t> integers(const std::string& k, std::vector<std::int64_t> dflt) const {
    if (!has(k)) return dflt;
    const json& a = raw(k);
    if (!a.is_array()) throw ConfigError(field(k), "expected an array of integers");
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      out.push_back(as_integer(a[i], field(k) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& k, std::vector<std::string> dflt) const {
    if (!has(k)) return dflt;
    const json& a = raw(k);
    if (!a.is_array()) throw ConfigError(field(k), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_string()) throw ConfigError(field(k) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(a[i].get<std::string>());
    }
    return out;
  }

  static double as_number(const json& v, const std::string& field) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    return v.get<double>();
  }

  static std::int64_t as_integer(const json& v, const std::string& field) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    throw ConfigError(field, "expected an integer");
  }

 private:
  const json* node_;
  std::string path_;
};

const json* child(const json& doc, const std::string& k) {
  return doc.contains(k) ? &doc.at(k) : nullptr;
}

template <class F>
auto wrap(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    // Re-anchor bare enum/validation errors at the config path.
    if (e.field().rfind(field, 0) == 0) throw;
    std::string what = e.what();
    const auto colon = what.find(": ");
    if (!e.field().empty() && colon != std::string::npos) what = what.substr(colon + 2);
    throw ConfigError(field, what);
  }
}

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::vector<double> from_vector(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Matrix to_matrix(const json& a, const std::string& field) {
  if (!a.is_array() || a.empty()) throw ConfigError(field, "expected a non-empty array of rows");
  const std::size_t cols = a[0].is_array() ? a[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < a.size(); ++r) {
    const std::string rf = field + "[" + std::to_string(r) + "]";
    if (!a[r].is_array() || a[r].size() != cols) throw ConfigError(rf, "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          Section::as_number(a[r][c], rf + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

json from_matrix(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::uint64_t> seeds_of(const std::vector<std::int64_t>& v, const std::string& field) {
  std::vector<std::uint64_t> out;
  for (auto s : v) {
    if (s < 0) throw ConfigError(field, "seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

OperatorKind operator_kind_from_string(const std::string& s, const std::string& field) {
  if (s == "identity") return OperatorKind::identity;
  if (s == "downsample") return OperatorKind::downsample;
  if (s == "blur" || s == "gaussian-blur") return OperatorKind::gaussian_blur;
  if (s == "mask") return OperatorKind::mask;
  if (s == "dense") return OperatorKind::dense;
  throw ConfigError(field, "unknown operator '" + s + "'");
}

const std::set<std::string> kMethodKeys{"mode", "rho", "rho_schedule", "likelihood", "beta1",
                                        "beta2", "delta", "rho_grid"};

MethodConfig read_method(const Section& sec, MethodConfig m) {
  if (sec.has("mode")) {
    m.mode = wrap(sec.field("mode"), [&] { return guidance_mode_from_string(sec.string("mode", "")); });
  }
  m.rho = sec.number("rho", m.rho);
  if (!(m.rho >= 0.0) || !std::isfinite(m.rho)) throw ConfigError(sec.field("rho"), "must be finite and >= 0");
  if (sec.has("rho_schedule")) {
    m.rho_schedule = wrap(sec.field("rho_schedule"),
                          [&] { return rho_schedule_from_string(sec.string("rho_schedule", "")); });
  }
  if (sec.has("likelihood")) {
    m.likelihood = wrap(sec.field("likelihood"),
                        [&] { return likelihood_source_from_string(sec.string("likelihood", "")); });
  }
  m.adam.beta1 = sec.number("beta1", m.adam.beta1);
  m.adam.beta2 = sec.number("beta2", m.adam.beta2);
  m.adam.delta = sec.number("delta", m.adam.delta);
  if (!(m.adam.beta1 >= 0.0 && m.adam.beta1 < 1.0)) throw ConfigError(sec.field("beta1"), "must be in [0, 1)");
  if (!(m.adam.beta2 >= 0.0 && m.adam.beta2 < 1.0)) throw ConfigError(sec.field("beta2"), "must be in [0, 1)");
  if (!(m.adam.delta > 0.0) || !std::isfinite(m.adam.delta)) throw ConfigError(sec.field("delta"), "must be positive");
  m.rho_grid = sec.numbers("rho_grid", m.rho_grid);
  for (std::size_t i = 0; i < m.rho_grid.size(); ++i) {
    if (!(m.rho_grid[i] >= 0.0) || !std::isfinite(m.rho_grid[i])) {
      throw ConfigError(sec.field("rho_grid") + "[" + std::to_string(i) + "]", "must be finite and >= 0");
    }
  }
  return m;
}

json method_json(const MethodConfig& m) {
  json j;
  j["mode"] = to_string(m.mode);
  j["rho"] = m.rho;
  j["rho_schedule"] = to_string(m.rho_schedule);
  j["likelihood"] = to_string(m.likelihood);
  j["beta1"] = m.adam.beta1;
  j["beta2"] = m.adam.beta2;
  j["delta"] = m.adam.delta;
  j["rho_grid"] = m.rho_grid;
  return j;
}

std::vector<std::int64_t> as_i64(const std::vector<std::uint64_t>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

LinearOperator OperatorConfig::build(int input_dim) const {
  switch (kind) {
    case OperatorKind::identity: return LinearOperator::identity(input_dim);
    case OperatorKind::mask:
      if (drop_fraction) return LinearOperator::random_mask(input_dim, *drop_fraction, mask_seed);
      return LinearOperator::mask(input_dim, kept);
    case OperatorKind::downsample:
    case OperatorKind::gaussian_blur: {
      if (shape.size() != input_dim) {
        throw ConfigError("observation.operator.shape", "must cover the prior dimension " +
                                                            std::to_string(input_dim));
      }
      if (kind == OperatorKind::downsample) return LinearOperator::downsample(shape, factor);
      return LinearOperator::gaussian_blur(shape, kernel_std, width);
    }
    case OperatorKind::dense:
      if (matrix.cols() != input_dim) {
        throw ConfigError("observation.operator.matrix", "must have " + std::to_string(input_dim) + " columns");
      }
      return LinearOperator::dense(matrix);
  }
  throw ConfigError("observation.operator.kind", "unsupported");
}

MethodConfig default_method(const std::string& name) {
  MethodConfig m;
  m.name = name;
  if (name == "dps") {
    m.mode = GuidanceMode::dps;
    m.rho_schedule = RhoSchedule::variance;
    m.rho = 0.1;
    m.rho_grid = {0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.14, 0.2, 0.3, 0.5, 0.7, 1.0};
  } else if (name == "adam-dps") {
    m.mode = GuidanceMode::adam_dps;
    m.rho_schedule = RhoSchedule::constant;
    m.rho = 0.2;
    m.rho_grid = {0.05, 0.07, 0.1, 0.14, 0.2, 0.28, 0.4, 0.56, 0.8, 1.1, 1.6, 2.2, 3.2};
  } else if (name == "cg") {
    m.mode = GuidanceMode::cg;
    m.rho_schedule = RhoSchedule::relative;
    m.rho = 1.0;
    m.rho_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
  } else if (name == "adam-cg") {
    m.mode = GuidanceMode::adam_cg;
    m.rho_schedule = RhoSchedule::relative;
    m.rho = 1.0;
    m.rho_grid = {0.25, 0.5, 1.0, 2.0, 4.0};
  } else if (name == "none") {
    m.mode = GuidanceMode::none;
  } else {
    throw ConfigError("methods." + name, "unknown method; set `mode` explicitly");
  }
  return m;
}

RunConfig default_run_config() {
  RunConfig c;
  c.observation.y = to_vector({-2.0});
  c.observation.x_true = to_vector({-2.0, 0.5});
  c.guidance = default_method("adam-dps");
  for (const char* name : {"none", "dps", "adam-dps", "cg", "adam-cg"}) c.methods[name] = default_method(name);
  return c;
}

const MethodConfig& RunConfig::method(const std::string& name) const {
  auto it = methods.find(name);
  if (it == methods.end()) throw ConfigError("methods." + name, "method is not defined");
  return it->second;
}

RunConfig run_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "configuration must be a table");
  RunConfig c = default_run_config();
  Section top(&doc, "",
              {"run", "schedule", "prior", "observation", "guidance", "methods", "metrics", "sweep",
               "ablation", "diagnose"});

  Section run(child(doc, "run"), "run", {"id", "seed", "chains", "jobs", "out_dir", "record"});
  c.id = run.string("id", c.id);
  if (c.id.empty() || c.id.find_first_of("/\\") != std::string::npos || c.id == "." || c.id == "..") {
    throw ConfigError("run.id", "must be a plain directory name");
  }
  c.seed = seeds_of({run.integer("seed", static_cast<std::int64_t>(c.seed))}, "run.seed")[0];
  c.chains = static_cast<int>(run.integer("chains", c.chains));
  if (c.chains < 1) throw ConfigError("run.chains", "must be at least 1");
  c.jobs = static_cast<int>(run.integer("jobs", c.jobs));
  if (c.jobs < 0) throw ConfigError("run.jobs", "must be >= 0");
  c.out_dir = run.string("out_dir", c.out_dir);
  if (run.has("record")) {
    c.record = wrap("run.record", [&] { return record_level_from_string(run.string("record", "")); });
  }

  Section sch(child(doc, "schedule"), "schedule", {"kind", "sigma_min", "sigma_max", "T", "steps", "rule"});
  if (sch.has("kind")) {
    c.schedule.kind = wrap("schedule.kind", [&] { return schedule_kind_from_string(sch.string("kind", "")); });
  }
  c.schedule.sigma_min = sch.number("sigma_min", c.schedule.sigma_min);
  c.schedule.sigma_max = sch.number("sigma_max", c.schedule.sigma_max);
  c.schedule.T = static_cast<int>(sch.integer("T", c.schedule.T));
  c.schedule.steps = static_cast<int>(sch.integer("steps", c.schedule.steps));
  if (sch.has("rule")) {
    c.schedule.rule = wrap("schedule.rule", [&] { return step_rule_from_string(sch.string("rule", "")); });
  }
  {
    const NoiseSchedule s = NoiseSchedule::build(c.schedule.kind, c.schedule.sigma_min,
                                                 c.schedule.sigma_max, c.schedule.T);
    TimestepGrid::uniform(s, c.schedule.steps);
  }

  if (const json* p = child(doc, "prior")) {
    Section pr(p, "prior", {"weights", "means", "covariances"});
    if (!pr.has("weights") || !pr.has("means") || !pr.has("covariances")) {
      throw ConfigError("prior", "needs weights, means and covariances");
    }
    const auto weights = pr.numbers("weights", {});
    const json& means = pr.raw("means");
    const json& covs = pr.raw("covariances");
    if (!means.is_array() || means.size() != weights.size()) {
      throw ConfigError("prior.means", "needs one mean per weight");
    }
    if (!covs.is_array() || covs.size() != weights.size()) {
      throw ConfigError("prior.covariances", "needs one covariance per weight");
    }
    std::vector<GaussianComponent> comps;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const std::string at = "[" + std::to_string(i) + "]";
      if (!means[i].is_array()) throw ConfigError("prior.means" + at, "expected an array");
      std::vector<double> mu;
      for (std::size_t k = 0; k < means[i].size(); ++k) {
        mu.push_back(Section::as_number(means[i][k], "prior.means" + at + "[" + std::to_string(k) + "]"));
      }
      comps.push_back({weights[i], to_vector(mu), to_matrix(covs[i], "prior.covariances" + at)});
    }
    c.prior = GmmPrior(std::move(comps));
    if (c.prior.dim() != 2) {
      c.observation.x_true.reset();
      c.observation.y.reset();
      c.observation.op.kept = {0};
    }
  }
  const int dim = c.prior.dim();

  if (const json* o = child(doc, "observation")) {
    Section ob(o, "observation", {"kind", "operator", "noise_std", "x_true", "y", "seed", "class"});
    const std::string kind = ob.string("kind", "linear");
    if (kind == "linear") {
      c.observation.kind = TaskKind::linear;
    } else if (kind == "class") {
      c.observation.kind = TaskKind::label;
    } else {
      throw ConfigError("observation.kind", "expected 'linear' or 'class'");
    }
    c.observation.noise_std = ob.number("noise_std", c.observation.noise_std);
    if (!(c.observation.noise_std >= 0.0)) throw ConfigError("observation.noise_std", "must be >= 0");
    if (ob.has("x_true")) {
      c.observation.x_true = to_vector(ob.numbers("x_true", {}));
      if (c.observation.x_true->size() != dim) {
        throw ConfigError("observation.x_true", "must have dimension " + std::to_string(dim));
      }
      if (!ob.has("y")) c.observation.y.reset();
    }
    if (ob.has("y")) c.observation.y = to_vector(ob.numbers("y", {}));
    c.observation.seed = seeds_of({ob.integer("seed", 0)}, "observation.seed")[0];
    c.observation.class_index = static_cast<int>(ob.integer("class", c.observation.class_index));
    if (ob.has("operator")) {
      Section op(&ob.raw("operator"), "observation.operator",
                 {"kind", "kept", "shape", "factor", "kernel_std", "width", "drop_fraction",
                  "mask_seed", "matrix"});
      auto& oc = c.observation.op;
      oc.kind = operator_kind_from_string(op.string("kind", to_string(oc.kind)), "observation.operator.kind");
      if (op.has("kept")) {
        oc.kept.clear();
        for (auto k : op.integers("kept", {})) oc.kept.push_back(static_cast<int>(k));
      }
      if (op.has("shape")) {
        const auto sh = op.integers("shape", {});
        if (sh.size() == 1) {
          oc.shape = {1, static_cast<int>(sh[0])};
        } else if (sh.size() == 2) {
          oc.shape = {static_cast<int>(sh[0]), static_cast<int>(sh[1])};
        } else {
          throw ConfigError("observation.operator.shape", "expected [cols] or [rows, cols]");
        }
      } else {
        oc.shape = {1, dim};
      }
      oc.factor = static_cast<int>(op.integer("factor", oc.factor));
      oc.kernel_std = op.number("kernel_std", oc.kernel_std);
      oc.width = static_cast<int>(op.integer("width", oc.width));
      if (op.has("drop_fraction")) oc.drop_fraction = op.number("drop_fraction", 0.0);
      oc.mask_seed = seeds_of({op.integer("mask_seed", 0)}, "observation.operator.mask_seed")[0];
      if (op.has("matrix")) oc.matrix = to_matrix(op.raw("matrix"), "observation.operator.matrix");
      if (oc.kind == OperatorKind::dense && oc.matrix.size() == 0) {
        throw ConfigError("observation.operator.matrix", "required for a dense operator");
      }
    }
  }
  if (c.observation.kind == TaskKind::linear) {
    const LinearOperator op = c.observation.op.build(dim);
    if (!c.observation.y && !c.observation.x_true) {
      throw ConfigError("observation.y", "give y or x_true for a linear task");
    }
    if (c.observation.y && c.observation.y->size() != op.output_dim()) {
      throw ConfigError("observation.y", "must have dimension " + std::to_string(op.output_dim()));
    }
  } else if (c.observation.class_index < 0 || c.observation.class_index >= c.prior.size()) {
    throw ConfigError("observation.class", "class index out of range");
  }

  if (const json* m = child(doc, "methods")) {
    if (!m->is_object()) throw ConfigError("methods", "expected a table of methods");
    for (const auto& [name, body] : m->items()) {
      Section sec(&body, "methods." + name, kMethodKeys);
      MethodConfig base;
      if (c.methods.count(name)) {
        base = c.methods.at(name);
      } else if (!sec.has("mode")) {
        throw ConfigError("methods." + name + ".mode", "required for a custom method");
      }
      base.name = name;
      c.methods[name] = read_method(sec, base);
    }
  }

  if (const json* g = child(doc, "guidance")) {
    std::set<std::string> keys = kMethodKeys;
    keys.insert({"method", "zeta", "injector_seed"});
    Section gs(g, "guidance", keys);
    const std::string name = gs.string("method", c.guidance.name);
    MethodConfig base = c.methods.count(name) ? c.methods.at(name) : MethodConfig{};
    if (!c.methods.count(name) && !gs.has("mode")) {
      throw ConfigError("guidance.method", "unknown method '" + name + "'");
    }
    base.name = name;
    c.guidance = read_method(gs, base);
    c.zeta = gs.number("zeta", c.zeta);
    if (!(c.zeta >= 0.0) || !std::isfinite(c.zeta)) throw ConfigError("guidance.zeta", "must be finite and >= 0");
    if (gs.has("injector_seed")) c.injector_seed = seeds_of({gs.integer("injector_seed", 0)}, "guidance.injector_seed")[0];
  } else {
    c.guidance = c.methods.at("adam-dps");
  }

  Section mt(child(doc, "metrics"), "metrics", {"span", "bins", "alpha", "reverse", "subdivisions"});
  c.metrics.span = mt.number("span", c.metrics.span);
  c.metrics.bins = static_cast<int>(mt.integer("bins", c.metrics.bins));
  c.metrics.alpha = mt.number("alpha", c.metrics.alpha);
  c.metrics.reverse = mt.boolean("reverse", c.metrics.reverse);
  c.metrics.subdivisions = static_cast<int>(mt.integer("subdivisions", c.metrics.subdivisions));
  if (c.metrics.subdivisions < 1) throw ConfigError("metrics.subdivisions", "must be positive");
  if (!(c.metrics.span > 0.0)) throw ConfigError("metrics.span", "must be positive");
  if (c.metrics.bins < 1) throw ConfigError("metrics.bins", "must be positive");
  if (!(c.metrics.alpha > 0.0)) throw ConfigError("metrics.alpha", "must be positive");

  auto check_methods = [&](const std::vector<std::string>& names, const std::string& field) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!c.methods.count(names[i])) {
        throw ConfigError(field + "[" + std::to_string(i) + "]", "unknown method '" + names[i] + "'");
      }
    }
  };

  Section sw(child(doc, "sweep"), "sweep",
             {"zetas", "seeds", "methods", "chains", "calibrate", "calibration_seeds", "calibration_chains"});
  c.sweep.zetas = sw.numbers("zetas", c.sweep.zetas);
  if (c.sweep.zetas.empty()) throw ConfigError("sweep.zetas", "must not be empty");
  for (std::size_t i = 0; i < c.sweep.zetas.size(); ++i) {
    if (!(c.sweep.zetas[i] >= 0.0) || !std::isfinite(c.sweep.zetas[i])) {
      throw ConfigError("sweep.zetas[" + std::to_string(i) + "]", "must be finite and >= 0");
    }
    if (i > 0 && c.sweep.zetas[i] < c.sweep.zetas[i - 1]) {
      throw ConfigError("sweep.zetas", "must be non-decreasing");
    }
  }
  c.sweep.seeds = seeds_of(sw.integers("seeds", as_i64(c.sweep.seeds)), "sweep.seeds");
  if (c.sweep.seeds.empty()) throw ConfigError("sweep.seeds", "must not be empty");
  c.sweep.methods = sw.strings("methods", c.sweep.methods);
  check_methods(c.sweep.methods, "sweep.methods");
  c.sweep.chains = static_cast<int>(sw.integer("chains", c.sweep.chains));
  if (c.sweep.chains < 1) throw ConfigError("sweep.chains", "must be at least 1");
  c.sweep.calibrate = sw.boolean("calibrate", c.sweep.calibrate);
  c.sweep.calibration_seeds =
      seeds_of(sw.integers("calibration_seeds", as_i64(c.sweep.calibration_seeds)), "sweep.calibration_seeds");
  c.sweep.calibration_chains = static_cast<int>(sw.integer("calibration_chains", c.sweep.calibration_chains));
  if (c.sweep.calibrate) {
    if (c.sweep.calibration_seeds.empty()) throw ConfigError("sweep.calibration_seeds", "must not be empty");
    if (c.sweep.calibration_chains < 1) throw ConfigError("sweep.calibration_chains", "must be at least 1");
    for (auto s : c.sweep.calibration_seeds) {
      for (auto t : c.sweep.seeds) {
        if (s == t) throw ConfigError("sweep.calibration_seeds", "must be disjoint from sweep.seeds");
      }
    }
  }

  Section ab(child(doc, "ablation"), "ablation", {"kind", "zeta", "budgets", "rules", "recalibrate_variants"});
  const std::string akind = ab.string("kind", c.ablation.kind == AblationKind::beta ? "beta" : "steps");
  if (akind == "beta") {
    c.ablation.kind = AblationKind::beta;
  } else if (akind == "steps") {
    c.ablation.kind = AblationKind::steps;
  } else {
    throw ConfigError("ablation.kind", "expected 'beta' or 'steps'");
  }
  c.ablation.zeta = ab.number("zeta", c.ablation.zeta);
  if (!(c.ablation.zeta >= 0.0)) throw ConfigError("ablation.zeta", "must be >= 0");
  c.ablation.recalibrate_variants = ab.boolean("recalibrate_variants", c.ablation.recalibrate_variants);
  if (ab.has("budgets")) {
    c.ablation.budgets.clear();
    for (auto b : ab.integers("budgets", {})) {
      if (b < 1 || b > c.schedule.T) {
        throw ConfigError("ablation.budgets", "every budget must be in [1, T]");
      }
      c.ablation.budgets.push_back(static_cast<int>(b));
    }
  }
  if (ab.has("rules")) {
    c.ablation.rules.clear();
    for (const auto& r : ab.strings("rules", {})) {
      c.ablation.rules.push_back(wrap("ablation.rules", [&] { return step_rule_from_string(r); }));
    }
  }

  Section dg(child(doc, "diagnose"), "diagnose", {"pair", "zeta", "seeds", "chains", "trajectories", "svg"});
  if (dg.has("pair")) {
    const auto pair = dg.strings("pair", {});
    if (pair.size() != 2 || pair[0] == pair[1]) {
      throw ConfigError("diagnose.pair", "expected two distinct method names");
    }
    check_methods(pair, "diagnose.pair");
    c.diagnose.pair = std::make_pair(pair[0], pair[1]);
  }
  c.diagnose.zeta = dg.number("zeta", c.diagnose.zeta);
  if (!(c.diagnose.zeta >= 0.0)) throw ConfigError("diagnose.zeta", "must be >= 0");
  c.diagnose.seeds = seeds_of(dg.integers("seeds", as_i64(c.diagnose.seeds)), "diagnose.seeds");
  if (c.diagnose.seeds.empty()) throw ConfigError("diagnose.seeds", "must not be empty");
  c.diagnose.chains = static_cast<int>(dg.integer("chains", c.diagnose.chains));
  if (c.diagnose.chains < 1) throw ConfigError("diagnose.chains", "must be at least 1");
  c.diagnose.trajectories = static_cast<int>(dg.integer("trajectories", c.diagnose.trajectories));
  if (c.diagnose.trajectories < 0) throw ConfigError("diagnose.trajectories", "must be >= 0");
  c.diagnose.svg = dg.boolean("svg", c.diagnose.svg);
  return c;
}

RunConfig run_config_from_text(const std::string& text, bool is_json) {
  json doc;
  if (is_json) {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("json", e.what());
    }
  } else {
    doc = parse_toml_lite(text);
  }
  return run_config_from_json(doc);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "cannot read configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  try {
    return run_config_from_text(ss.str(), is_json);
  } catch (const ConfigError& e) {
    throw ConfigError(e.field(), std::string(e.what()) + " (in " + path + ")");
  }
}

json to_json(const MethodConfig& m) { return method_json(m); }

json to_json(const RunConfig& c) {
  json j;
  j["run"] = {{"id", c.id}, {"seed", c.seed}, {"chains", c.chains}, {"jobs", c.jobs},
              {"record", to_string(c.record)}};
  if (!c.out_dir.empty()) j["run"]["out_dir"] = c.out_dir;
  j["schedule"] = {{"kind", to_string(c.schedule.kind)},
                   {"sigma_min", c.schedule.sigma_min},
                   {"sigma_max", c.schedule.sigma_max},
                   {"T", c.schedule.T},
                   {"steps", c.schedule.steps},
                   {"rule", to_string(c.schedule.rule)}};
  json weights = json::array(), means = json::array(), covs = json::array();
  for (const auto& comp : c.prior.components()) {
    weights.push_back(comp.weight);
    means.push_back(from_vector(comp.mean));
    covs.push_back(from_matrix(comp.covariance));
  }
  j["prior"] = {{"weights", weights}, {"means", means}, {"covariances", covs}};

  const auto& o = c.observation;
  json op = {{"kind", to_string(o.op.kind)}};
  switch (o.op.kind) {
    case OperatorKind::mask:
      if (o.op.drop_fraction) {
        op["drop_fraction"] = *o.op.drop_fraction;
        op["mask_seed"] = o.op.mask_seed;
      } else {
        op["kept"] = o.op.kept;
      }
      break;
    case OperatorKind::downsample:
      op["shape"] = {o.op.shape.rows, o.op.shape.cols};
      op["factor"] = o.op.factor;
      break;
    case OperatorKind::gaussian_blur:
      op["shape"] = {o.op.shape.rows, o.op.shape.cols};
      op["kernel_std"] = o.op.kernel_std;
      op["width"] = o.op.width;
      break;
    case OperatorKind::dense: op["matrix"] = from_matrix(o.op.matrix); break;
    case OperatorKind::identity: break;
  }
  j["observation"] = {{"kind", o.kind == TaskKind::linear ? "linear" : "class"},
                      {"operator", op},
                      {"noise_std", o.noise_std},
                      {"seed", o.seed},
                      {"class", o.class_index}};
  if (o.x_true) j["observation"]["x_true"] = from_vector(*o.x_true);
  if (o.y) j["observation"]["y"] = from_vector(*o.y);

  j["methods"] = json::object();
  for (const auto& [name, m] : c.methods) j["methods"][name] = method_json(m);
  j["guidance"] = method_json(c.guidance);
  j["guidance"]["method"] = c.guidance.name;
  j["guidance"]["zeta"] = c.zeta;
  if (c.injector_seed) j["guidance"]["injector_seed"] = *c.injector_seed;
  j["metrics"] = {{"span", c.metrics.span}, {"bins", c.metrics.bins}, {"alpha", c.metrics.alpha},
                  {"reverse", c.metrics.reverse}, {"subdivisions", c.metrics.subdivisions}};
  j["sweep"] = {{"zetas", c.sweep.zetas},
                {"seeds", c.sweep.seeds},
                {"methods", c.sweep.methods},
                {"chains", c.sweep.chains},
                {"calibrate", c.sweep.calibrate},
                {"calibration_seeds", c.sweep.calibration_seeds},
                {"calibration_chains", c.sweep.calibration_chains}};
  json rules = json::array();
  for (auto r : c.ablation.rules) rules.push_back(to_string(r));
  j["ablation"] = {{"kind", c.ablation.kind == AblationKind::beta ? "beta" : "steps"},
                   {"zeta", c.ablation.zeta},
                   {"budgets", c.ablation.budgets},
                   {"rules", rules},
                   {"recalibrate_variants", c.ablation.recalibrate_variants}};
  j["diagnose"] = {{"zeta", c.diagnose.zeta},
                   {"seeds", c.diagnose.seeds},
                   {"chains", c.diagnose.chains},
                   {"trajectories", c.diagnose.trajectories},
                   {"svg", c.diagnose.svg}};
  if (c.diagnose.pair) j["diagnose"]["pair"] = {c.diagnose.pair->first, c.diagnose.pair->second};
  return j;
}

}  // namespace mgs
