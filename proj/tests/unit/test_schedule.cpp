#include <gtest/gtest.h>

#include <cmath>

#include "mgs/errors.hpp"
#include "mgs/schedule.hpp"

using namespace mgs;

TEST(NoiseSchedule, GeometricThreeLevels) {
  const auto s = NoiseSchedule::build(ScheduleKind::geometric, 0.01, 10.0, 2);
  ASSERT_EQ(s.max_index(), 2);
  EXPECT_DOUBLE_EQ(s.sigma(0), 0.01);
  EXPECT_NEAR(s.sigma(1), std::sqrt(0.1), 1e-12);
  EXPECT_DOUBLE_EQ(s.sigma(2), 10.0);
}

TEST(NoiseSchedule, LinearThreeLevels) {
  const auto s = NoiseSchedule::build(ScheduleKind::linear, 1.0, 3.0, 2);
  EXPECT_DOUBLE_EQ(s.sigma(0), 1.0);
  EXPECT_DOUBLE_EQ(s.sigma(1), 2.0);
  EXPECT_DOUBLE_EQ(s.sigma(2), 3.0);
}

TEST(NoiseSchedule, GeometricRatioIsConstant) {
  const auto s = NoiseSchedule::build(ScheduleKind::geometric, 0.002, 80.0, 100);
  ASSERT_EQ(s.sigmas().size(), 101u);
  const double ratio = std::exp(std::log(80.0 / 0.002) / 100.0);
  for (int t = 1; t <= 100; ++t) EXPECT_NEAR(s.sigma(t) / s.sigma(t - 1), ratio, 1e-12);
}

TEST(NoiseSchedule, RejectsBadBounds) {
  EXPECT_THROW(NoiseSchedule::build(ScheduleKind::geometric, 0.0, 1.0, 10), ConfigError);
  EXPECT_THROW(NoiseSchedule::build(ScheduleKind::geometric, 2.0, 1.0, 10), ConfigError);
  EXPECT_THROW(NoiseSchedule::build(ScheduleKind::geometric, 0.1, 1.0, 1), ConfigError);
  EXPECT_THROW(NoiseSchedule({0.0, 1.0, 1.0}, ScheduleKind::linear), ConfigError);
}

TEST(TransitionVariance, FromZeroLevel) {
  const NoiseSchedule s({0.0, 2.0}, ScheduleKind::linear);
  EXPECT_DOUBLE_EQ(s.transition_variance(0, 1), 4.0);
}

TEST(TransitionVariance, AdjacentLevelsShrinkToZero) {
  const NoiseSchedule s({1.0, 1.0 + 1e-9}, ScheduleKind::linear);
  const double v = s.transition_variance(0, 1);
  EXPECT_GT(v, 0.0);
  EXPECT_NEAR(v, 2e-9, 1e-15);
}

TEST(TransitionVariance, MatchesExplicitLevels) {
  const auto s = NoiseSchedule::build(ScheduleKind::geometric, 0.01, 10.0, 100);
  const double a = 0.01 * std::pow(1000.0, 0.51);
  const double b = 0.01 * std::pow(1000.0, 0.50);
  EXPECT_NEAR(s.transition_variance(50, 51), a * a - b * b, 1e-12);
}

TEST(TransitionVariance, OrderingError) {
  const auto s = NoiseSchedule::build(ScheduleKind::geometric, 0.01, 10.0, 10);
  EXPECT_THROW(s.transition_variance(5, 5), OrderingError);
  EXPECT_THROW(s.transition_variance(6, 5), OrderingError);
}

TEST(TransitionVariance, Composes) {
  const auto s = NoiseSchedule::build(ScheduleKind::geometric, 0.01, 25.0, 100);
  for (int sidx = 0; sidx < 98; sidx += 7) {
    for (int u = sidx + 1; u < 99; u += 11) {
      const int t = 99;
      EXPECT_NEAR(s.transition_variance(u, t) + s.transition_variance(sidx, u), s.transition_variance(sidx, t),
                  1e-12 * s.transition_variance(sidx, t));
    }
  }
}

TEST(TimestepGrid, UniformIsDescendingAndEndsAtZero) {
  const auto s = NoiseSchedule::build(ScheduleKind::geometric, 0.01, 25.0, 100);
  for (int steps : {1, 12, 25, 50, 100}) {
    const auto g = TimestepGrid::uniform(s, steps);
    ASSERT_EQ(g.size(), steps + 1);
    EXPECT_EQ(g[0], 100);
    EXPECT_EQ(g[steps], 0);
    for (int i = 1; i < g.size(); ++i) {
      EXPECT_LT(g[i], g[i - 1]);
      EXPECT_GT(s.transition_variance(g[i], g[i - 1]), 0.0);
    }
  }
}

TEST(TimestepGrid, RejectsInvalid) {
  const auto s = NoiseSchedule::build(ScheduleKind::geometric, 0.01, 25.0, 10);
  EXPECT_THROW(TimestepGrid({5, 5, 0}, s), ConfigError);
  EXPECT_THROW(TimestepGrid({5, 2}, s), ConfigError);
  EXPECT_THROW(TimestepGrid({11, 0}, s), ConfigError);
  EXPECT_THROW(TimestepGrid::uniform(s, 11), ConfigError);
  EXPECT_THROW(TimestepGrid::uniform(s, 0), ConfigError);
}
