#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgs/config.hpp"

namespace mgs {

struct GradcheckResult {
  std::string name;
  int points = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

inline constexpr double kFirstOrderTolerance = 1e-5;
inline constexpr double kSecondOrderTolerance = 1e-4;

// ||a - b|| / max(||b||, floor): relative error with an absolute floor so
// near-zero references do not blow up.
double relative_error(const Vector& a, const Vector& b, double floor = 1e-2);
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-2);

// Central-difference checks of every analytic derivative at `points` random
// (x_t, t) pairs: prior score vs log density, Tweedie Jacobian vs Tweedie
// mean, DPS and CG guidance vs their losses, and the closed-form likelihood
// score vs quadrature.
std::vector<GradcheckResult> run_gradchecks(const RunConfig& config, int points = 100,
                                            std::uint64_t seed = 7);

}  // namespace mgs
