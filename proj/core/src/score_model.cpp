#include "mgs/score_model.hpp"

namespace mgs {

ScoreModel::ScoreModel(GmmPrior prior, NoiseSchedule schedule)
    : prior_(std::move(prior)), schedule_(std::move(schedule)) {
  levels_.reserve(static_cast<std::size_t>(schedule_.max_index()) + 1);
  for (int t = 0; t <= schedule_.max_index(); ++t) levels_.emplace_back(prior_, schedule_.sigma(t));
}

const NoisedMixture& ScoreModel::at(int t) const {
  schedule_.sigma(t);  // range check
  return levels_[static_cast<std::size_t>(t)];
}

double ScoreModel::noised_log_density(const Vector& x, int t) const { return at(t).log_density(x); }
Vector ScoreModel::prior_score(const Vector& x, int t) const { return at(t).score(x); }
Vector ScoreModel::tweedie_denoise(const Vector& x_t, int t) const {
  return mgs::tweedie_denoise(at(t), x_t);
}
Matrix ScoreModel::tweedie_jacobian(const Vector& x_t, int t) const {
  return mgs::tweedie_jacobian(at(t), x_t);
}
Vector ScoreModel::class_posterior(const Vector& x_t, int t) const {
  return mgs::class_posterior(at(t), x_t);
}

Vector epsilon_from_score(const Vector& score, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sigma", "must be positive");
  return -sigma * score;
}

Vector score_from_epsilon(const Vector& eps, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sigma", "must be positive");
  return -eps / sigma;
}

Vector tweedie_denoise(const NoisedMixture& mixture, const Vector& x_t) {
  const double s2 = mixture.sigma() * mixture.sigma();
  return x_t + s2 * mixture.score(x_t);
}

Matrix tweedie_jacobian(const NoisedMixture& mixture, const Vector& x_t) {
  const double s2 = mixture.sigma() * mixture.sigma();
  Matrix j = s2 * mixture.hessian(x_t);
  j.diagonal().array() += 1.0;
  return j;
}

Vector class_posterior(const NoisedMixture& mixture, const Vector& x_t) {
  if (mixture.size() < 2) {
    throw ClassificationError("class posterior needs a prior with at least two components");
  }
  return mixture.responsibilities(x_t);
}

}  // namespace mgs
