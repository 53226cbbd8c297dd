#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mgs/gmm.hpp"
#include "mgs/linalg.hpp"
#include "mgs/samplers.hpp"

namespace mgs {

struct HistogramSpec {
  std::array<double, 2> lo{-1.0, -1.0};
  std::array<double, 2> hi{1.0, 1.0};
  std::array<int, 2> bins{80, 80};
  double alpha = 1.0;    // total pseudo-count spread evenly over all cells
  bool reverse = false;  // KL(target || empirical) instead of KL(empirical || target)
  int subdivisions = 4;  // target cell mass by a composite midpoint rule on n x n sub-cells

  // Bounds = component means -/+ span * max_std per axis.
  static HistogramSpec around(const GmmPrior& prior, double span = 6.0, int bins = 80);
  void validate() const;
  int cells() const { return bins[0] * bins[1]; }
};

// 2-D counts. Out-of-bounds samples land in the clamped edge cell and are
// tallied in `clamped()`.
class Histogram2D {
 public:
  explicit Histogram2D(const HistogramSpec& spec);

  void add(double x, double y);
  void merge(const Histogram2D& other);

  long total() const { return total_; }
  long clamped() const { return clamped_; }
  long count(int i, int j) const { return cells_[static_cast<std::size_t>(i * spec_.bins[1] + j)]; }
  const std::vector<long>& cells() const { return cells_; }
  const HistogramSpec& spec() const { return spec_; }
  std::array<double, 2> center(int i, int j) const;

 private:
  HistogramSpec spec_;
  std::vector<long> cells_;
  long total_ = 0;
  long clamped_ = 0;
};

using LogDensity = std::function<double(const Vector&)>;

struct KlEstimate {
  double kl = 0.0;  // nats
  long samples = 0;
  long clamped = 0;
};

// Smoothed-histogram KL between samples and an analytic 2-D density. Target
// cell masses use the midpoint rule and are renormalized over the grid.
KlEstimate grid_kl(std::span<const Vector> samples, const LogDensity& target,
                   const HistogramSpec& spec);

// Cosine similarity; NaN when either vector is zero.
double cosine_similarity(const Vector& a, const Vector& b);

// Cosines between consecutive applied guidance terms (raw g for DPS/CG,
// stabilized g_hat for the Adam modes). Entry i pairs transition i with i+1;
// NaN marks pairs with a zero or missing term.
std::vector<double> sequential_cosine(const Trajectory& trajectory);

// Percentile with linear interpolation between order statistics (q in [0,1]).
// NaN entries are ignored; returns NaN if nothing remains.
double percentile(std::vector<double> values, double q);

struct DiagnosticSeries {
  std::string name;
  std::vector<double> p25;
  std::vector<double> median;
  std::vector<double> p75;
};

// Per-step 25/50/75 percentiles of a per-record scalar across chains.
DiagnosticSeries loss_band(std::span<const Trajectory> trajectories);
DiagnosticSeries band(const std::string& name, const std::vector<std::vector<double>>& per_chain);

struct ProjectedPoint {
  double x = 0.0;  // along w (difference of the two solutions)
  double y = 0.0;  // along u (start minus target)
};

struct ContourSample {
  double x = 0.0;
  double y = 0.0;
  double mse = 0.0;
};

struct Projection {
  Vector u;
  Vector w;
  std::vector<ProjectedPoint> a;
  std::vector<ProjectedPoint> b;
  std::vector<ContourSample> contour;
};

// Projects both trajectories (every recorded x_t plus the final sample) on
// the plane spanned by u = normalize(x_T - x*) and w = normalized component of
// (final_a - final_b) orthogonal to u, with the target x* at the origin.
Projection project_trajectories(const Trajectory& a, const Trajectory& b, const Vector& target,
                                int contour_resolution = 25);

}  // namespace mgs
