#pragma once

#include <Eigen/Cholesky>

#include <vector>

#include "mgs/linalg.hpp"
#include "mgs/rng.hpp"

namespace mgs {

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Matrix covariance;
};

// Weighted Gaussian mixture p(x_0). Weights must sum to one within 1e-12 and
// every covariance must admit a Cholesky factorization.
class GmmPrior {
 public:
  explicit GmmPrior(std::vector<GaussianComponent> components);

  // Three moderately separated 2-D components used by the synthetic study.
  static GmmPrior default_synthetic();

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(components_.size()); }
  const std::vector<GaussianComponent>& components() const { return components_; }
  const GaussianComponent& component(int i) const { return components_[static_cast<std::size_t>(i)]; }

  // Square root of the largest covariance eigenvalue over all components.
  double max_std() const;
  // Per-axis [min mean - k*max_std, max mean + k*max_std].
  std::pair<Vector, Vector> bounding_box(double k) const;

  double log_density(const Vector& x) const;
  Vector sample(NormalSource& rng) const;

 private:
  std::vector<GaussianComponent> components_;
  std::vector<Matrix> chol_lower_;
  int dim_ = 0;
};

// Scratch and results of one mixture evaluation. Reuse across calls to keep
// the sampler loop allocation-free.
struct MixtureEval {
  double log_density = 0.0;
  Vector responsibilities;  // r_i(x)
  Matrix component_scores;  // column i: -(Sigma_i + sigma^2 I)^{-1} (x - mu_i)
  Vector score;
  Matrix hessian;  // filled only when requested
  Vector log_terms;
  Vector diff;
};

// The prior convolved with N(0, sigma^2 I): still a mixture with inflated
// covariances Sigma_i + sigma^2 I.
class NoisedMixture {
 public:
  NoisedMixture(const GmmPrior& prior, double sigma);

  double sigma() const { return sigma_; }
  int dim() const { return dim_; }
  int size() const { return static_cast<int>(means_.size()); }

  void evaluate(const Vector& x, bool with_hessian, MixtureEval& out) const;

  double log_density(const Vector& x) const;
  Vector responsibilities(const Vector& x) const;
  Vector score(const Vector& x) const;
  Matrix hessian(const Vector& x) const;

  // Per-component pieces exposed for the closed-form likelihood oracle.
  const Matrix& precision(int i) const { return precisions_[static_cast<std::size_t>(i)]; }
  const Vector& mean(int i) const { return means_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<Vector> means_;
  std::vector<Matrix> precisions_;
  std::vector<double> log_norms_;  // log w_i - 0.5 log det(2 pi K_i)
  double sigma_;
  int dim_;
};

}  // namespace mgs
