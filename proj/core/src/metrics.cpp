#include "mgs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mgs {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

HistogramSpec HistogramSpec::around(const GmmPrior& prior, double span, int bins) {
  if (prior.dim() != 2) throw DimensionError("histogram spec needs a 2-D prior");
  auto [lo, hi] = prior.bounding_box(span);
  HistogramSpec spec;
  spec.lo = {lo[0], lo[1]};
  spec.hi = {hi[0], hi[1]};
  spec.bins = {bins, bins};
  spec.validate();
  return spec;
}

void HistogramSpec::validate() const {
  for (int a = 0; a < 2; ++a) {
    if (!std::isfinite(lo[a]) || !std::isfinite(hi[a]) || !(lo[a] < hi[a])) {
      throw ConfigError("metrics.bounds", "need finite lo < hi on every axis");
    }
    if (bins[a] < 1) throw ConfigError("metrics.bins", "must be positive");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("metrics.alpha", "must be positive");
  if (subdivisions < 1) throw ConfigError("metrics.subdivisions", "must be positive");
}

Histogram2D::Histogram2D(const HistogramSpec& spec)
    : spec_(spec), cells_(static_cast<std::size_t>(spec.cells()), 0) {
  spec_.validate();
}

void Histogram2D::add(double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) throw NumericalError("non-finite sample in histogram");
  const double p[2] = {x, y};
  int idx[2];
  bool outside = false;
  for (int a = 0; a < 2; ++a) {
    const double f = (p[a] - spec_.lo[a]) / (spec_.hi[a] - spec_.lo[a]);
    if (f < 0.0 || f > 1.0) outside = true;
    idx[a] = std::clamp(static_cast<int>(std::floor(f * spec_.bins[a])), 0, spec_.bins[a] - 1);
  }
  if (outside) ++clamped_;
  ++cells_[static_cast<std::size_t>(idx[0] * spec_.bins[1] + idx[1])];
  ++total_;
}

void Histogram2D::merge(const Histogram2D& other) {
  if (other.spec_.bins != spec_.bins || other.spec_.lo != spec_.lo || other.spec_.hi != spec_.hi) {
    throw DimensionError("cannot merge histograms with different layouts");
  }
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
  total_ += other.total_;
  clamped_ += other.clamped_;
}

std::array<double, 2> Histogram2D::center(int i, int j) const {
  const double w0 = (spec_.hi[0] - spec_.lo[0]) / spec_.bins[0];
  const double w1 = (spec_.hi[1] - spec_.lo[1]) / spec_.bins[1];
  return {spec_.lo[0] + (i + 0.5) * w0, spec_.lo[1] + (j + 0.5) * w1};
}

KlEstimate grid_kl(std::span<const Vector> samples, const LogDensity& target,
                   const HistogramSpec& spec) {
  if (samples.empty()) throw EmptyInputError("grid_kl needs at least one sample");
  Histogram2D hist(spec);
  for (const auto& s : samples) {
    require_dim(s, 2, "grid_kl sample");
    hist.add(s[0], s[1]);
  }

  const int n_cells = spec.cells();
  std::vector<double> log_q(static_cast<std::size_t>(n_cells));
  double best = -std::numeric_limits<double>::infinity();
  const int sub = spec.subdivisions;
  const double w0 = (spec.hi[0] - spec.lo[0]) / spec.bins[0];
  const double w1 = (spec.hi[1] - spec.lo[1]) / spec.bins[1];
  std::vector<double> parts(static_cast<std::size_t>(sub * sub));
  Vector c(2);
  for (int i = 0; i < spec.bins[0]; ++i) {
    for (int j = 0; j < spec.bins[1]; ++j) {
      double top = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < sub; ++a) {
        for (int b = 0; b < sub; ++b) {
          c << spec.lo[0] + (i + (a + 0.5) / sub) * w0, spec.lo[1] + (j + (b + 0.5) / sub) * w1;
          const double v = target(c);
          if (std::isnan(v)) throw NumericalError("target log-density returned NaN");
          parts[static_cast<std::size_t>(a * sub + b)] = v;
          top = std::max(top, v);
        }
      }
      double v = top;
      if (std::isfinite(top)) {
        double acc = 0.0;
        for (double p : parts) acc += std::exp(p - top);
        v = top + std::log(acc);
      }
      log_q[static_cast<std::size_t>(i * spec.bins[1] + j)] = v;
      best = std::max(best, v);
    }
  }
  if (!std::isfinite(best)) throw NumericalError("target has zero mass on the histogram grid");
  double z = 0.0;
  for (double v : log_q) z += std::exp(v - best);
  const double log_z = best + std::log(z);  // equal cell areas cancel

  const double n = static_cast<double>(hist.total());
  const double pseudo = spec.alpha / n_cells;
  double kl = 0.0;
  for (int k = 0; k < n_cells; ++k) {
    const double p = (static_cast<double>(hist.cells()[static_cast<std::size_t>(k)]) + pseudo) / (n + spec.alpha);
    const double lq = log_q[static_cast<std::size_t>(k)] - log_z;
    const double lp = std::log(p);
    if (spec.reverse) {
      const double q = std::exp(lq);
      if (q > 0.0) kl += q * (lq - lp);
    } else {
      kl += p * (lp - lq);
    }
  }
  return {kl, hist.total(), hist.clamped()};
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: size mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return kNaN;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

std::vector<double> sequential_cosine(const Trajectory& trajectory) {
  const auto& r = trajectory.records;
  if (r.size() < 2) return {};
  // The terminal record holds no transition.
  const std::size_t transitions = r.size() - 1;
  std::vector<double> out;
  out.reserve(transitions > 0 ? transitions - 1 : 0);
  for (std::size_t i = 0; i + 1 < transitions; ++i) {
    const auto& a = r[i].g_hat;
    const auto& b = r[i + 1].g_hat;
    if (a.size() > 0 && b.size() > 0) {
      out.push_back(cosine_similarity(a, b));
    } else {
      out.push_back(r[i + 1].cos_prev);
    }
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("q", "must be in [0, 1]");
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return values[lo] + f * (values[hi] - values[lo]);
}

DiagnosticSeries band(const std::string& name, const std::vector<std::vector<double>>& per_chain) {
  if (per_chain.empty()) throw EmptyInputError("band needs at least one chain");
  const std::size_t steps = per_chain.front().size();
  for (const auto& c : per_chain) {
    if (c.size() != steps) throw DimensionError("band: chains have mismatched grids");
  }
  DiagnosticSeries out;
  out.name = name;
  std::vector<double> column(per_chain.size());
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t c = 0; c < per_chain.size(); ++c) column[c] = per_chain[c][s];
    out.p25.push_back(percentile(column, 0.25));
    out.median.push_back(percentile(column, 0.50));
    out.p75.push_back(percentile(column, 0.75));
  }
  return out;
}

DiagnosticSeries loss_band(std::span<const Trajectory> trajectories) {
  std::vector<std::vector<double>> per_chain;
  per_chain.reserve(trajectories.size());
  for (const auto& t : trajectories) {
    std::vector<double> losses;
    losses.reserve(t.records.size());
    for (const auto& r : t.records) losses.push_back(r.loss);
    per_chain.push_back(std::move(losses));
  }
  return band("loss", per_chain);
}

Projection project_trajectories(const Trajectory& a, const Trajectory& b, const Vector& target,
                                int contour_resolution) {
  const auto d = target.size();
  require_dim(a.initial, d, "trajectory a");
  require_dim(b.initial, d, "trajectory b");
  if ((a.initial - b.initial).norm() > 1e-12 * std::max(1.0, a.initial.norm())) {
    throw ConfigError("diagnose.pair", "paired trajectories must share their initial noise");
  }
  Projection p;
  const Vector start = a.initial - target;
  const double ns = start.norm();
  if (ns == 0.0) throw ProjectionDegenerateError("initial noise coincides with the target");
  p.u = start / ns;
  Vector diff = a.final_sample - b.final_sample;
  diff -= diff.dot(p.u) * p.u;
  const double nd = diff.norm();
  if (!(nd > 1e-12 * std::max(1.0, ns))) {
    throw ProjectionDegenerateError("the two final samples do not span a second axis");
  }
  p.w = diff / nd;

  auto project = [&](const Trajectory& tr, std::vector<ProjectedPoint>& out) {
    auto put = [&](const Vector& x) {
      const Vector r = x - target;
      out.push_back({r.dot(p.w), r.dot(p.u)});
    };
    put(tr.initial);
    for (const auto& rec : tr.records) {
      if (rec.x_t.size() == d && &rec != &tr.records.front()) put(rec.x_t);
    }
    if (tr.records.empty() || tr.records.back().x_t.size() != d) put(tr.final_sample);
  };
  project(a, p.a);
  project(b, p.b);

  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  for (const auto* pts : {&p.a, &p.b}) {
    for (const auto& q : *pts) {
      xmin = std::min(xmin, q.x);
      xmax = std::max(xmax, q.x);
      ymin = std::min(ymin, q.y);
      ymax = std::max(ymax, q.y);
    }
  }
  const double padx = 0.1 * std::max(xmax - xmin, 1e-9);
  const double pady = 0.1 * std::max(ymax - ymin, 1e-9);
  xmin -= padx;
  xmax += padx;
  ymin -= pady;
  ymax += pady;
  const int n = std::max(2, contour_resolution);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = xmin + (xmax - xmin) * i / (n - 1);
      const double y = ymin + (ymax - ymin) * j / (n - 1);
      const Vector pt = target + x * p.w + y * p.u;
      p.contour.push_back({x, y, (pt - target).squaredNorm() / static_cast<double>(d)});
    }
  }
  return p;
}

}  // namespace mgs
