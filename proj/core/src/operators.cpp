#include "mgs/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mgs/rng.hpp"

namespace mgs {

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::identity: return "identity";
    case OperatorKind::downsample: return "downsample";
    case OperatorKind::gaussian_blur: return "blur";
    case OperatorKind::mask: return "mask";
    case OperatorKind::dense: return "dense";
  }
  return "?";
}

std::string to_string(LossKind kind) {
  return kind == LossKind::gaussian_nll ? "gaussian-nll" : "cross-entropy";
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double kernel_std, int width) {
  if (!(kernel_std > 0.0)) throw ConfigError("observation.operator.kernel_std", "must be positive");
  if (width < 1 || width % 2 == 0) throw ConfigError("observation.operator.width", "must be odd");
  const int h = width / 2;
  std::vector<double> k(static_cast<std::size_t>(width));
  double total = 0.0;
  for (int i = -h; i <= h; ++i) {
    const double v = std::exp(-0.5 * i * i / (kernel_std * kernel_std));
    k[static_cast<std::size_t>(i + h)] = v;
    total += v;
  }
  for (auto& v : k) v /= total;
  return k;
}

LinearOperator LinearOperator::identity(int dim) {
  if (dim < 1) throw ConfigError("observation.operator", "dimension must be positive");
  LinearOperator op;
  op.kind_ = OperatorKind::identity;
  op.input_dim_ = op.output_dim_ = dim;
  op.shape_ = {1, dim};
  return op;
}

LinearOperator LinearOperator::downsample(GridShape shape, int factor) {
  if (shape.rows < 1 || shape.cols < 1) throw ConfigError("observation.operator.shape", "must be positive");
  if (factor < 1) throw ConfigError("observation.operator.factor", "must be positive");
  if (shape.cols % factor != 0 || (!shape.is_1d() && shape.rows % factor != 0)) {
    throw ConfigError("observation.operator.factor", "must divide the signal length");
  }
  LinearOperator op;
  op.kind_ = OperatorKind::downsample;
  op.shape_ = shape;
  op.factor_ = factor;
  op.input_dim_ = shape.size();
  op.output_dim_ = shape.is_1d() ? shape.cols / factor : (shape.rows / factor) * (shape.cols / factor);
  return op;
}

LinearOperator LinearOperator::gaussian_blur(GridShape shape, double kernel_std, int width) {
  if (shape.rows < 1 || shape.cols < 1) throw ConfigError("observation.operator.shape", "must be positive");
  LinearOperator op;
  op.kind_ = OperatorKind::gaussian_blur;
  op.shape_ = shape;
  op.kernel_std_ = kernel_std;
  op.kernel_ = gaussian_kernel(kernel_std, width);
  op.input_dim_ = op.output_dim_ = shape.size();
  return op;
}

LinearOperator LinearOperator::mask(int dim, std::vector<int> kept) {
  if (dim < 1) throw ConfigError("observation.operator", "dimension must be positive");
  std::vector<int> seen(static_cast<std::size_t>(dim), 0);
  for (int k : kept) {
    if (k < 0 || k >= dim) throw ConfigError("observation.operator.kept", "index out of range");
    if (seen[static_cast<std::size_t>(k)]++) throw ConfigError("observation.operator.kept", "duplicate index");
  }
  LinearOperator op;
  op.kind_ = OperatorKind::mask;
  op.input_dim_ = dim;
  op.output_dim_ = static_cast<int>(kept.size());
  op.shape_ = {1, dim};
  op.kept_ = std::move(kept);
  return op;
}

LinearOperator LinearOperator::random_mask(int dim, double drop_fraction, std::uint64_t seed) {
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0)) {
    throw ConfigError("observation.operator.drop_fraction", "must be in [0, 1]");
  }
  const int drop = static_cast<int>(std::ceil(drop_fraction * dim - 1e-12));
  std::vector<int> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  NormalSource rng(seed);
  // Fisher-Yates with explicit uniform draws; std::shuffle is library-specific.
  for (int i = dim - 1; i > 0; --i) {
    const int j = std::min(i, static_cast<int>(rng.uniform() * (i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> kept(order.begin() + drop, order.end());
  std::sort(kept.begin(), kept.end());
  return mask(dim, std::move(kept));
}

LinearOperator LinearOperator::dense(Matrix matrix) {
  if (matrix.rows() < 1 || matrix.cols() < 1 || !matrix.allFinite()) {
    throw ConfigError("observation.operator.matrix", "must be a finite non-empty matrix");
  }
  LinearOperator op;
  op.kind_ = OperatorKind::dense;
  op.input_dim_ = static_cast<int>(matrix.cols());
  op.output_dim_ = static_cast<int>(matrix.rows());
  op.shape_ = {1, op.input_dim_};
  op.matrix_ = std::move(matrix);
  return op;
}

Vector LinearOperator::blur_apply(const Vector& x, bool transpose) const {
  const int h = static_cast<int>(kernel_.size()) / 2;
  const int rows = shape_.rows;
  const int cols = shape_.cols;
  auto pass = [&](const Vector& in, bool along_cols) {
    Vector out = Vector::Zero(in.size());
    const int n = along_cols ? cols : rows;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const int pos = along_cols ? c : r;
        for (int k = -h; k <= h; ++k) {
          const int q = reflect_index(pos + k, n);
          const int src = along_cols ? r * cols + q : q * cols + c;
          const double w = kernel_[static_cast<std::size_t>(k + h)];
          if (transpose) {
            out[src] += w * in[r * cols + c];
          } else {
            out[r * cols + c] += w * in[src];
          }
        }
      }
    }
    return out;
  };
  Vector y = pass(x, true);
  if (!shape_.is_1d()) y = pass(y, false);
  return y;
}

Vector LinearOperator::downsample_apply(const Vector& x) const {
  const int f = factor_;
  if (shape_.is_1d()) {
    Vector y(output_dim_);
    for (int i = 0; i < output_dim_; ++i) y[i] = x.segment(i * f, f).mean();
    return y;
  }
  const int oc = shape_.cols / f;
  Vector y = Vector::Zero(output_dim_);
  for (int r = 0; r < shape_.rows; ++r) {
    for (int c = 0; c < shape_.cols; ++c) y[(r / f) * oc + c / f] += x[r * shape_.cols + c];
  }
  return y / static_cast<double>(f * f);
}

Vector LinearOperator::downsample_adjoint(const Vector& u) const {
  const int f = factor_;
  Vector x(input_dim_);
  if (shape_.is_1d()) {
    for (int i = 0; i < input_dim_; ++i) x[i] = u[i / f] / f;
    return x;
  }
  const int oc = shape_.cols / f;
  for (int r = 0; r < shape_.rows; ++r) {
    for (int c = 0; c < shape_.cols; ++c) {
      x[r * shape_.cols + c] = u[(r / f) * oc + c / f] / static_cast<double>(f * f);
    }
  }
  return x;
}

Vector LinearOperator::apply(const Vector& x) const {
  require_dim(x, input_dim_, "operator input");
  switch (kind_) {
    case OperatorKind::identity: return x;
    case OperatorKind::downsample: return downsample_apply(x);
    case OperatorKind::gaussian_blur: return blur_apply(x, false);
    case OperatorKind::mask: {
      Vector y(output_dim_);
      for (int i = 0; i < output_dim_; ++i) y[i] = x[kept_[static_cast<std::size_t>(i)]];
      return y;
    }
    case OperatorKind::dense: return matrix_ * x;
  }
  return x;
}

Vector LinearOperator::adjoint(const Vector& u) const {
  require_dim(u, output_dim_, "operator adjoint input");
  switch (kind_) {
    case OperatorKind::identity: return u;
    case OperatorKind::downsample: return downsample_adjoint(u);
    case OperatorKind::gaussian_blur: return blur_apply(u, true);
    case OperatorKind::mask: {
      Vector x = Vector::Zero(input_dim_);
      for (int i = 0; i < output_dim_; ++i) x[kept_[static_cast<std::size_t>(i)]] = u[i];
      return x;
    }
    case OperatorKind::dense: return matrix_.transpose() * u;
  }
  return u;
}

Matrix LinearOperator::to_dense() const {
  if (kind_ == OperatorKind::dense) return matrix_;
  Matrix m(output_dim_, input_dim_);
  for (int j = 0; j < input_dim_; ++j) m.col(j) = apply(Vector::Unit(input_dim_, j));
  return m;
}

const Vector& Condition::y() const {
  if (is_label()) throw UnsupportedError("condition holds a class label, not a measurement");
  return std::get<Vector>(value_);
}

int Condition::class_index() const {
  if (!is_label()) throw UnsupportedError("condition holds a measurement, not a class label");
  return std::get<int>(value_);
}

ObservationModel ObservationModel::gaussian(LinearOperator op, double noise_std) {
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw ConfigError("observation.noise_std", "must be finite and >= 0");
  }
  ObservationModel m;
  m.loss_kind_ = LossKind::gaussian_nll;
  m.op_ = std::move(op);
  m.noise_std_ = noise_std;
  return m;
}

ObservationModel ObservationModel::classifier(GmmPrior prior) {
  if (prior.size() < 2) throw ClassificationError("classifier needs at least two components");
  ObservationModel m;
  m.loss_kind_ = LossKind::cross_entropy;
  m.classifier_ = std::move(prior);
  return m;
}

const LinearOperator& ObservationModel::op() const {
  if (!op_) throw UnsupportedError("cross-entropy observation has no linear operator");
  return *op_;
}

const GmmPrior& ObservationModel::classifier_prior() const {
  if (!classifier_) throw UnsupportedError("gaussian observation has no classifier");
  return *classifier_;
}

int ObservationModel::input_dim() const {
  return op_ ? op_->input_dim() : classifier_->dim();
}

Condition ObservationModel::observe(const Vector& x_true, std::uint64_t seed) const {
  if (loss_kind_ != LossKind::gaussian_nll) {
    throw UnsupportedError("observe needs a gaussian observation model");
  }
  Vector y = op_->apply(x_true);
  if (noise_std_ > 0.0) {
    NormalSource rng(seed);
    y += noise_std_ * rng.draw(y.size());
  }
  return Condition::measurement(std::move(y));
}

void ObservationModel::validate(const Condition& condition) const {
  if (loss_kind_ == LossKind::gaussian_nll) {
    if (condition.is_label()) throw ConfigError("observation", "gaussian observation needs a measurement");
    require_dim(condition.y(), op_->output_dim(), "measurement");
    if (!condition.y().allFinite()) throw ConfigError("observation.y", "must be finite");
  } else {
    if (!condition.is_label()) throw ConfigError("observation", "classifier needs a class label");
    const int c = condition.class_index();
    if (c < 0 || c >= classifier_->size()) {
      throw ConfigError("observation.class", "class index " + std::to_string(c) + " out of range");
    }
  }
}

LossGradient ObservationModel::loss_and_gradient(const Vector& x0, const Condition& condition) const {
  validate(condition);
  LossGradient out;
  if (loss_kind_ == LossKind::gaussian_nll) {
    if (!(noise_std_ > 0.0)) {
      throw DegenerateLikelihoodError("gaussian likelihood with noise_std = 0 has no gradient");
    }
    const double inv = 1.0 / (noise_std_ * noise_std_);
    const Vector r = op_->apply(x0) - condition.y();
    out.loss = 0.5 * r.squaredNorm() * inv;
    out.grad = op_->adjoint(r) * inv;
    return out;
  }
  const NoisedMixture clean(*classifier_, 0.0);
  MixtureEval e;
  clean.evaluate(x0, false, e);
  const int c = condition.class_index();
  out.loss = -(e.log_terms[c] - e.log_density);
  out.grad = -(e.component_scores.col(c) - e.score);
  return out;
}

}  // namespace mgs
