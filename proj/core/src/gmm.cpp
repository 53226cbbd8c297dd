#include "mgs/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mgs {

namespace {

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

GmmPrior::GmmPrior(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw ConfigError("prior", "needs at least one component");
  dim_ = static_cast<int>(components_.front().mean.size());
  if (dim_ < 1) throw ConfigError("prior.means", "dimension must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    const std::string at = "[" + std::to_string(i) + "]";
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw ConfigError("prior.weights" + at, "must be positive");
    }
    total += c.weight;
    if (c.mean.size() != dim_ || !c.mean.allFinite()) {
      throw ConfigError("prior.means" + at, "must be finite with dimension " + std::to_string(dim_));
    }
    if (c.covariance.rows() != dim_ || c.covariance.cols() != dim_ || !c.covariance.allFinite()) {
      throw ConfigError("prior.covariances" + at,
                        "must be a finite " + std::to_string(dim_) + "x" + std::to_string(dim_) +
                            " matrix");
    }
    const double scale = std::max(1.0, c.covariance.cwiseAbs().maxCoeff());
    if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw ConfigError("prior.covariances" + at, "must be symmetric");
    }
    Eigen::LLT<Matrix> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      throw ConfigError("prior.covariances" + at, "must be positive definite");
    }
    chol_lower_.push_back(llt.matrixL());
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("prior.weights", "must sum to 1 (got " + std::to_string(total) + ")");
  }
}

GmmPrior GmmPrior::default_synthetic() {
  auto cov = [](double a, double b, double c) {
    Matrix m(2, 2);
    m << a, b, b, c;
    return m;
  };
  auto vec = [](double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
  };
  return GmmPrior({
      {0.40, vec(-4.0, -2.0), cov(0.8, 0.0, 0.8)},
      {0.35, vec(0.0, 3.0), cov(1.0, 0.3, 0.6)},
      {0.25, vec(4.0, -1.0), cov(0.5, 0.0, 0.5)},
  });
}

double GmmPrior::max_std() const {
  double best = 0.0;
  for (const auto& c : components_) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(c.covariance, Eigen::EigenvaluesOnly);
    best = std::max(best, es.eigenvalues().maxCoeff());
  }
  return std::sqrt(best);
}

std::pair<Vector, Vector> GmmPrior::bounding_box(double k) const {
  Vector lo = components_.front().mean;
  Vector hi = lo;
  for (const auto& c : components_) {
    lo = lo.cwiseMin(c.mean);
    hi = hi.cwiseMax(c.mean);
  }
  const double pad = k * max_std();
  lo.array() -= pad;
  hi.array() += pad;
  return {lo, hi};
}

double GmmPrior::log_density(const Vector& x) const {
  return NoisedMixture(*this, 0.0).log_density(x);
}

Vector GmmPrior::sample(NormalSource& rng) const {
  double u = rng.uniform();
  std::size_t pick = components_.size() - 1;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (u < components_[i].weight) {
      pick = i;
      break;
    }
    u -= components_[i].weight;
  }
  return components_[pick].mean + chol_lower_[pick] * rng.draw(dim_);
}

NoisedMixture::NoisedMixture(const GmmPrior& prior, double sigma) : sigma_(sigma), dim_(prior.dim()) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "must be >= 0");
  const Matrix eye = Matrix::Identity(dim_, dim_);
  for (const auto& c : prior.components()) {
    const Matrix k = c.covariance + sigma * sigma * eye;
    Eigen::LLT<Matrix> llt(k);
    const Matrix l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    means_.push_back(c.mean);
    precisions_.push_back(llt.solve(eye));
    log_norms_.push_back(std::log(c.weight) -
                         0.5 * (dim_ * std::log(2.0 * std::numbers::pi) + log_det));
  }
}

void NoisedMixture::evaluate(const Vector& x, bool with_hessian, MixtureEval& out) const {
  require_dim(x, dim_, "mixture input");
  const int k = size();
  out.log_terms.resize(k);
  out.responsibilities.resize(k);
  out.component_scores.resize(dim_, k);
  out.diff.resize(dim_);
  for (int i = 0; i < k; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    out.diff.noalias() = x - means_[ui];
    out.component_scores.col(i).noalias() = -(precisions_[ui] * out.diff);
    out.log_terms[i] = log_norms_[ui] + 0.5 * out.diff.dot(out.component_scores.col(i));
  }
  out.log_density = log_sum_exp(out.log_terms);
  out.responsibilities = (out.log_terms.array() - out.log_density).exp();
  out.score.noalias() = out.component_scores * out.responsibilities;
  if (with_hessian) {
    out.hessian.setZero(dim_, dim_);
    for (int i = 0; i < k; ++i) {
      const double r = out.responsibilities[i];
      const auto s = out.component_scores.col(i);
      out.hessian.noalias() += r * (s * s.transpose());
      out.hessian.noalias() -= r * precisions_[static_cast<std::size_t>(i)];
    }
    out.hessian.noalias() -= out.score * out.score.transpose();
  }
}

double NoisedMixture::log_density(const Vector& x) const {
  MixtureEval e;
  evaluate(x, false, e);
  return e.log_density;
}

Vector NoisedMixture::responsibilities(const Vector& x) const {
  MixtureEval e;
  evaluate(x, false, e);
  return e.responsibilities;
}

Vector NoisedMixture::score(const Vector& x) const {
  MixtureEval e;
  evaluate(x, false, e);
  return e.score;
}

Matrix NoisedMixture::hessian(const Vector& x) const {
  MixtureEval e;
  evaluate(x, true, e);
  return e.hessian;
}

}  // namespace mgs
