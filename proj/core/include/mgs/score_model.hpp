#pragma once

#include <vector>

#include "mgs/gmm.hpp"
#include "mgs/schedule.hpp"

namespace mgs {

// Analytic stand-in for a trained denoiser: the exact score of the noised GMM
// at every schedule level, cached per timestep.
class ScoreModel {
 public:
  ScoreModel(GmmPrior prior, NoiseSchedule schedule);

  const GmmPrior& prior() const { return prior_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  int dim() const { return prior_.dim(); }
  double sigma(int t) const { return schedule_.sigma(t); }

  const NoisedMixture& at(int t) const;

  double noised_log_density(const Vector& x, int t) const;
  Vector prior_score(const Vector& x, int t) const;
  // E[x_0 | x_t] = x_t + sigma_t^2 * score.
  Vector tweedie_denoise(const Vector& x_t, int t) const;
  // d x_{0|t} / d x_t = I + sigma_t^2 * Hessian(log p_t); symmetric.
  Matrix tweedie_jacobian(const Vector& x_t, int t) const;
  // Responsibilities under the noised mixture; needs >= 2 components.
  Vector class_posterior(const Vector& x_t, int t) const;

 private:
  GmmPrior prior_;
  NoiseSchedule schedule_;
  std::vector<NoisedMixture> levels_;
};

// eps = -sigma * score. Throws ConfigError when sigma <= 0.
Vector epsilon_from_score(const Vector& score, double sigma);
Vector score_from_epsilon(const Vector& eps, double sigma);

// Tweedie pieces at an arbitrary noise level (used by oracles and limits).
Vector tweedie_denoise(const NoisedMixture& mixture, const Vector& x_t);
Matrix tweedie_jacobian(const NoisedMixture& mixture, const Vector& x_t);
Vector class_posterior(const NoisedMixture& mixture, const Vector& x_t);

}  // namespace mgs
