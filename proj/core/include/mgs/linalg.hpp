#pragma once

#include <Eigen/Dense>

#include <string>

#include "mgs/errors.hpp"

namespace mgs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline void require_dim(const Vector& x, Eigen::Index d, const char* what) {
  if (x.size() != d) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(d) +
                         ", got " + std::to_string(x.size()));
  }
}

inline bool all_finite(const Vector& x) { return x.allFinite(); }

}  // namespace mgs
