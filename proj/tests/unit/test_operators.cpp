#include <gtest/gtest.h>

#include <cmath>

#include "mgs/operators.hpp"
#include "mgs/rng.hpp"

using namespace mgs;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// <A x, u> == <x, A^T u> and apply agrees with the dense matrix.
void check_adjoint(const LinearOperator& op, std::uint64_t seed) {
  NormalSource rng(seed);
  const Matrix dense = op.to_dense();
  ASSERT_EQ(dense.rows(), op.output_dim());
  ASSERT_EQ(dense.cols(), op.input_dim());
  for (int i = 0; i < 5; ++i) {
    const Vector x = rng.draw(op.input_dim());
    const Vector u = rng.draw(op.output_dim());
    EXPECT_NEAR(op.apply(x).dot(u), x.dot(op.adjoint(u)), 1e-12);
    EXPECT_LT((op.apply(x) - dense * x).norm(), 1e-12);
    EXPECT_LT((op.adjoint(u) - dense.transpose() * u).norm(), 1e-12);
  }
}

}  // namespace

TEST(LinearOperator, IdentityPassesThrough) {
  EXPECT_EQ(LinearOperator::identity(2).apply(vec({1, 2})), vec({1, 2}));
}

TEST(LinearOperator, DownsampleBlockMeans) {
  const auto op = LinearOperator::downsample({1, 4}, 2);
  EXPECT_EQ(op.apply(vec({1, 3, 5, 7})), vec({2, 6}));
  EXPECT_THROW(LinearOperator::downsample({1, 5}, 2), ConfigError);
}

TEST(LinearOperator, Downsample2d) {
  const auto op = LinearOperator::downsample({2, 4}, 2);
  const Vector y = op.apply(vec({1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(y, vec({3.5, 5.5}));
}

TEST(LinearOperator, BlurOfImpulseIsKernel) {
  const auto op = LinearOperator::gaussian_blur({1, 9}, 1.0, 5);
  Vector impulse = Vector::Zero(9);
  impulse[4] = 1.0;
  const Vector out = op.apply(impulse);
  std::vector<double> k;
  double total = 0.0;
  for (int i = -2; i <= 2; ++i) {
    k.push_back(std::exp(-0.5 * i * i));
    total += k.back();
  }
  for (int i = 0; i < 9; ++i) {
    const double expect = (i >= 2 && i <= 6) ? k[static_cast<std::size_t>(i - 2)] / total : 0.0;
    EXPECT_NEAR(out[i], expect, 1e-15);
  }
}

TEST(LinearOperator, BlurPreservesConstants) {
  const auto op = LinearOperator::gaussian_blur({4, 5}, 1.3, 7);
  const Vector out = op.apply(Vector::Constant(20, 2.5));
  EXPECT_LT((out - Vector::Constant(20, 2.5)).norm(), 1e-12);
}

TEST(LinearOperator, ReflectPadding) {
  EXPECT_EQ(reflect_index(-1, 4), 1);
  EXPECT_EQ(reflect_index(-2, 4), 2);
  EXPECT_EQ(reflect_index(4, 4), 2);
  EXPECT_EQ(reflect_index(5, 4), 1);
  EXPECT_EQ(reflect_index(0, 1), 0);
}

TEST(LinearOperator, MaskKeepsListedCoordinates) {
  const auto op = LinearOperator::mask(4, {3, 1});
  EXPECT_EQ(op.apply(vec({10, 11, 12, 13})), vec({13, 11}));
  EXPECT_EQ(op.adjoint(vec({1, 2})), vec({0, 2, 0, 1}));
  EXPECT_THROW(LinearOperator::mask(3, {0, 0}), ConfigError);
  EXPECT_THROW(LinearOperator::mask(3, {3}), ConfigError);
  EXPECT_EQ(LinearOperator::mask(3, {}).output_dim(), 0);
}

TEST(LinearOperator, RandomMaskIsSeededAndExactCount) {
  const auto a = LinearOperator::random_mask(50, 0.9, 17);
  const auto b = LinearOperator::random_mask(50, 0.9, 17);
  const auto c = LinearOperator::random_mask(50, 0.9, 18);
  EXPECT_EQ(a.output_dim(), 5);
  EXPECT_EQ(a.kept(), b.kept());
  EXPECT_NE(a.kept(), c.kept());
}

TEST(LinearOperator, AdjointsMatchDense) {
  check_adjoint(LinearOperator::identity(3), 1);
  check_adjoint(LinearOperator::downsample({1, 6}, 3), 2);
  check_adjoint(LinearOperator::downsample({4, 6}, 2), 3);
  check_adjoint(LinearOperator::gaussian_blur({1, 7}, 0.8, 5), 4);
  check_adjoint(LinearOperator::gaussian_blur({5, 6}, 1.5, 5), 5);
  check_adjoint(LinearOperator::mask(6, {5, 0, 2}), 6);
  check_adjoint(LinearOperator::random_mask(10, 0.3, 9), 7);
  check_adjoint(LinearOperator::dense((Matrix(2, 3) << 1, 2, 3, -1, 0.5, 4).finished()), 8);
}

TEST(LinearOperator, DimensionMismatch) {
  EXPECT_THROW(LinearOperator::identity(2).apply(vec({1, 2, 3})), DimensionError);
}

TEST(ObservationModel, NoiselessObserveIsExact) {
  const auto obs = ObservationModel::gaussian(LinearOperator::identity(2), 0.0);
  EXPECT_EQ(obs.observe(vec({1, 1}), 3).y(), vec({1, 1}));
  const auto ds = ObservationModel::gaussian(LinearOperator::downsample({1, 4}, 2), 0.0);
  EXPECT_EQ(ds.observe(vec({1, 3, 5, 7}), 3).y(), vec({2, 6}));
}

TEST(ObservationModel, ObserveIsSeeded) {
  const auto obs = ObservationModel::gaussian(LinearOperator::identity(3), 0.5);
  const Vector x = vec({0.1, 0.2, 0.3});
  EXPECT_EQ(obs.observe(x, 42).y(), obs.observe(x, 42).y());
  EXPECT_NE(obs.observe(x, 42).y(), obs.observe(x, 43).y());
}

TEST(ObservationModel, GaussianLossExamples) {
  const auto obs = ObservationModel::gaussian(LinearOperator::identity(2), 1.0);
  const auto at_y = obs.loss_and_gradient(vec({0.3, -0.2}), Condition::measurement(vec({0.3, -0.2})));
  EXPECT_EQ(at_y.loss, 0.0);
  EXPECT_EQ(at_y.grad, vec({0, 0}));
  const auto lg = obs.loss_and_gradient(vec({1, 0}), Condition::measurement(vec({0, 0})));
  EXPECT_DOUBLE_EQ(lg.loss, 0.5);
  EXPECT_EQ(lg.grad, vec({1, 0}));
}

TEST(ObservationModel, DownsampleGradientMatchesFiniteDifferences) {
  const auto obs = ObservationModel::gaussian(LinearOperator::downsample({1, 4}, 2), 0.7);
  NormalSource rng(8);
  const Condition y = Condition::measurement(rng.draw(2));
  const Vector x = rng.draw(4);
  const Vector g = obs.loss_and_gradient(x, y).grad;
  for (int i = 0; i < 4; ++i) {
    Vector a = x, b = x;
    a[i] += 1e-5;
    b[i] -= 1e-5;
    const double fd = (obs.loss_and_gradient(a, y).loss - obs.loss_and_gradient(b, y).loss) / 2e-5;
    EXPECT_NEAR(g[i], fd, 1e-8);
  }
}

TEST(ObservationModel, ClassifierCrossEntropyGradient) {
  const auto obs = ObservationModel::classifier(GmmPrior::default_synthetic());
  const Condition c = Condition::label(1);
  const Vector x = vec({0.5, 0.8});
  const auto lg = obs.loss_and_gradient(x, c);
  EXPECT_GT(lg.loss, 0.0);
  for (int i = 0; i < 2; ++i) {
    Vector a = x, b = x;
    a[i] += 1e-5;
    b[i] -= 1e-5;
    const double fd = (obs.loss_and_gradient(a, c).loss - obs.loss_and_gradient(b, c).loss) / 2e-5;
    EXPECT_NEAR(lg.grad[i], fd, 1e-7);
  }
}

TEST(ObservationModel, Validation) {
  const auto obs = ObservationModel::gaussian(LinearOperator::identity(2), 0.0);
  EXPECT_THROW(obs.loss_and_gradient(vec({0, 0}), Condition::measurement(vec({1, 1}))),
               DegenerateLikelihoodError);
  const auto noisy = ObservationModel::gaussian(LinearOperator::identity(2), 0.1);
  EXPECT_THROW(noisy.validate(Condition::measurement(vec({1}))), DimensionError);
  EXPECT_THROW(noisy.validate(Condition::label(0)), ConfigError);
  const auto cls = ObservationModel::classifier(GmmPrior::default_synthetic());
  EXPECT_THROW(cls.validate(Condition::label(3)), ConfigError);
}
