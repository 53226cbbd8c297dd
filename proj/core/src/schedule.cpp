#include "mgs/schedule.hpp"

#include <cmath>

#include "mgs/errors.hpp"

namespace mgs {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::geometric ? "geometric" : "linear";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "geometric") return ScheduleKind::geometric;
  if (name == "linear" || name == "linear-in-sigma") return ScheduleKind::linear;
  throw ConfigError("schedule.kind", "unknown schedule kind '" + name + "'");
}

NoiseSchedule NoiseSchedule::build(ScheduleKind kind, double sigma_min, double sigma_max, int T) {
  if (!(sigma_min > 0.0) || !std::isfinite(sigma_min)) {
    throw ConfigError("schedule.sigma_min", "must be positive and finite");
  }
  if (!(sigma_max > sigma_min) || !std::isfinite(sigma_max)) {
    throw ConfigError("schedule.sigma_max", "must be finite and exceed sigma_min");
  }
  if (T < 2) throw ConfigError("schedule.T", "must be at least 2");

  std::vector<double> sigmas(static_cast<std::size_t>(T) + 1);
  for (int i = 0; i <= T; ++i) {
    const double f = static_cast<double>(i) / T;
    sigmas[static_cast<std::size_t>(i)] =
        kind == ScheduleKind::geometric ? sigma_min * std::pow(sigma_max / sigma_min, f)
                                        : sigma_min + (sigma_max - sigma_min) * f;
  }
  // Pin the endpoints against pow round-off.
  sigmas.front() = sigma_min;
  sigmas.back() = sigma_max;
  return NoiseSchedule(std::move(sigmas), kind);
}

NoiseSchedule::NoiseSchedule(std::vector<double> sigmas, ScheduleKind kind)
    : sigmas_(std::move(sigmas)), kind_(kind) {
  if (sigmas_.size() < 2) throw ConfigError("schedule.sigmas", "need at least two levels");
  if (!(sigmas_.front() >= 0.0)) throw ConfigError("schedule.sigmas", "sigma_0 must be >= 0");
  for (std::size_t i = 1; i < sigmas_.size(); ++i) {
    if (!(sigmas_[i] > sigmas_[i - 1]) || !std::isfinite(sigmas_[i])) {
      throw ConfigError("schedule.sigmas", "levels must be finite and strictly increasing");
    }
  }
}

double NoiseSchedule::sigma(int t) const {
  if (t < 0 || t > max_index()) {
    throw OrderingError("timestep " + std::to_string(t) + " outside [0, " +
                        std::to_string(max_index()) + "]");
  }
  return sigmas_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::transition_variance(int s, int t) const {
  if (s >= t) {
    throw OrderingError("transition_variance needs s < t, got s=" + std::to_string(s) +
                        " t=" + std::to_string(t));
  }
  const double ss = sigma(s);
  const double st = sigma(t);
  // (st - ss)(st + ss) keeps precision for adjacent levels.
  return (st - ss) * (st + ss);
}

TimestepGrid TimestepGrid::uniform(const NoiseSchedule& schedule, int steps) {
  const int T = schedule.max_index();
  if (steps < 1 || steps > T) {
    throw ConfigError("schedule.steps", "must be in [1, " + std::to_string(T) + "]");
  }
  std::vector<int> idx(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    idx[static_cast<std::size_t>(i)] =
        static_cast<int>(std::lround(static_cast<double>(T) * (steps - i) / steps));
  }
  return TimestepGrid(std::move(idx), schedule);
}

TimestepGrid::TimestepGrid(std::vector<int> indices, const NoiseSchedule& schedule)
    : indices_(std::move(indices)) {
  if (indices_.empty()) throw ConfigError("grid", "must not be empty");
  if (indices_.back() != 0) throw ConfigError("grid", "must end at timestep 0");
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] < 0 || indices_[i] > schedule.max_index()) {
      throw ConfigError("grid", "index " + std::to_string(indices_[i]) + " outside the schedule");
    }
    if (i > 0 && indices_[i] >= indices_[i - 1]) {
      throw ConfigError("grid", "indices must be strictly descending");
    }
  }
}

}  // namespace mgs
