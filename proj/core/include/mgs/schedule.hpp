#pragma once

#include <span>
#include <string>
#include <vector>

namespace mgs {

enum class ScheduleKind { geometric, linear };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

// Noise levels sigma_0 < ... < sigma_T of the variance-exploding process
// x_t = x_0 + sigma_t * eps.
class NoiseSchedule {
 public:
  // T+1 levels from sigma_min to sigma_max. Throws ConfigError on bad bounds.
  static NoiseSchedule build(ScheduleKind kind, double sigma_min, double sigma_max, int T);

  // Explicit levels; must be strictly increasing with sigmas[0] >= 0.
  NoiseSchedule(std::vector<double> sigmas, ScheduleKind kind);

  int max_index() const { return static_cast<int>(sigmas_.size()) - 1; }
  double sigma(int t) const;
  std::span<const double> sigmas() const { return sigmas_; }
  ScheduleKind kind() const { return kind_; }

  // sigma_t^2 - sigma_s^2 for s < t. Throws OrderingError when s >= t.
  double transition_variance(int s, int t) const;

 private:
  std::vector<double> sigmas_;
  ScheduleKind kind_;
};

// Descending timestep indices t_n > ... > t_0 = 0 used by a sampler.
class TimestepGrid {
 public:
  // `steps` transitions spread uniformly over the schedule's indices.
  static TimestepGrid uniform(const NoiseSchedule& schedule, int steps);

  TimestepGrid(std::vector<int> indices, const NoiseSchedule& schedule);
  // The trivial grid {0}: no transitions.
  TimestepGrid() = default;

  std::span<const int> indices() const { return indices_; }
  int size() const { return static_cast<int>(indices_.size()); }
  int transitions() const { return size() - 1; }
  int operator[](int i) const { return indices_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<int> indices_{0};
};

}  // namespace mgs
