#pragma once

#include <cstdint>
#include <random>

#include "mgs/linalg.hpp"

namespace mgs {

using Engine = std::mt19937_64;

// Seeded engine plus a standard normal source. Each chain owns its own.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    engine_.seed(seq);
  }

  double draw() { return dist_(engine_); }

  Vector draw(Eigen::Index d) {
    Vector out(d);
    for (Eigen::Index i = 0; i < d; ++i) out[i] = dist_(engine_);
    return out;
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  Engine& engine() { return engine_; }

 private:
  Engine engine_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace mgs
