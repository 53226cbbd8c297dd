#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mgs/gmm.hpp"
#include "mgs/linalg.hpp"

namespace mgs {

// Row-major layout of a flattened 1-D (rows == 1) or 2-D signal.
struct GridShape {
  int rows = 1;
  int cols = 1;
  int size() const { return rows * cols; }
  bool is_1d() const { return rows == 1; }
};

enum class OperatorKind { identity, downsample, gaussian_blur, mask, dense };

std::string to_string(OperatorKind kind);

// Measurement map A. Structured kinds never materialize a matrix; `to_dense`
// exists for tests and the closed-form oracles.
class LinearOperator {
 public:
  static LinearOperator identity(int dim);
  // Block averaging by `factor` along every non-trivial axis.
  static LinearOperator downsample(GridShape shape, int factor);
  // Separable Gaussian blur, kernel truncated to an odd `width` and
  // renormalized; reflection padding ("abcd|cba").
  static LinearOperator gaussian_blur(GridShape shape, double kernel_std, int width);
  // Keeps the listed coordinates in the given order; an empty list observes nothing.
  static LinearOperator mask(int dim, std::vector<int> kept);
  // Drops ceil(drop_fraction * dim) coordinates chosen by a seeded shuffle.
  static LinearOperator random_mask(int dim, double drop_fraction, std::uint64_t seed);
  static LinearOperator dense(Matrix matrix);

  OperatorKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const GridShape& shape() const { return shape_; }
  int factor() const { return factor_; }
  double kernel_std() const { return kernel_std_; }
  const std::vector<double>& kernel() const { return kernel_; }
  const std::vector<int>& kept() const { return kept_; }
  const Matrix& matrix() const { return matrix_; }

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& u) const;
  Matrix to_dense() const;

 private:
  LinearOperator() = default;

  Vector blur_apply(const Vector& x, bool transpose) const;
  Vector downsample_apply(const Vector& x) const;
  Vector downsample_adjoint(const Vector& u) const;

  OperatorKind kind_ = OperatorKind::identity;
  int input_dim_ = 0;
  int output_dim_ = 0;
  GridShape shape_;
  int factor_ = 1;
  double kernel_std_ = 0.0;
  std::vector<double> kernel_;
  std::vector<int> kept_;
  Matrix matrix_;
};

// Reflect index into [0, n) without repeating the edge sample.
int reflect_index(int i, int n);

// Normalized, truncated Gaussian kernel of odd width.
std::vector<double> gaussian_kernel(double kernel_std, int width);

enum class LossKind { gaussian_nll, cross_entropy };

std::string to_string(LossKind kind);

// A measurement vector y or a class label.
class Condition {
 public:
  static Condition measurement(Vector y) { return Condition(std::move(y)); }
  static Condition label(int class_index) { return Condition(class_index); }

  bool is_label() const { return std::holds_alternative<int>(value_); }
  const Vector& y() const;
  int class_index() const;

 private:
  explicit Condition(Vector y) : value_(std::move(y)) {}
  explicit Condition(int c) : value_(c) {}
  std::variant<Vector, int> value_;
};

struct LossGradient {
  double loss = 0.0;  // nats, additive constants dropped
  Vector grad;        // d loss / d x0
};

// p(y | x0) and its negative log likelihood L. Two flavours: a linear
// operator with Gaussian noise, or cross-entropy against the prior's clean
// (sigma = 0) class posterior.
class ObservationModel {
 public:
  static ObservationModel gaussian(LinearOperator op, double noise_std);
  static ObservationModel classifier(GmmPrior prior);

  LossKind loss_kind() const { return loss_kind_; }
  const LinearOperator& op() const;
  double noise_std() const { return noise_std_; }
  const GmmPrior& classifier_prior() const;
  int input_dim() const;

  // y = A x_true + sigma_y * eps with eps drawn from `seed`.
  Condition observe(const Vector& x_true, std::uint64_t seed) const;

  LossGradient loss_and_gradient(const Vector& x0, const Condition& condition) const;

  void validate(const Condition& condition) const;

 private:
  ObservationModel() = default;

  LossKind loss_kind_ = LossKind::gaussian_nll;
  std::optional<LinearOperator> op_;
  double noise_std_ = 0.0;
  std::optional<GmmPrior> classifier_;
};

}  // namespace mgs
