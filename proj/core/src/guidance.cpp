#include "mgs/guidance.hpp"

#include <cmath>

namespace mgs {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must be in [0, 1)");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("delta", "must be positive");
}

void NoiseInjectorConfig::validate() const {
  if (!(zeta >= 0.0) || !std::isfinite(zeta)) throw ConfigError("zeta", "must be finite and >= 0");
}

GuidanceTerm dps_term(const ObservationModel& observation, const Condition& condition,
                      const Vector& x0, const Matrix& jacobian, JacobianMode mode) {
  LossGradient lg = observation.loss_and_gradient(x0, condition);
  GuidanceTerm out;
  out.loss = lg.loss;
  if (mode == JacobianMode::frozen) {
    out.g = -lg.grad;
  } else {
    out.g.noalias() = -(jacobian.transpose() * lg.grad);
  }
  return out;
}

GuidanceTerm dps_likelihood_score(const ScoreModel& model, const ObservationModel& observation,
                                  const Condition& condition, const Vector& x_t, int t,
                                  JacobianMode jacobian) {
  if (observation.input_dim() != model.dim()) {
    throw DimensionError("observation input dimension does not match the prior");
  }
  const NoisedMixture& mix = model.at(t);
  MixtureEval e;
  mix.evaluate(x_t, true, e);
  const double s2 = mix.sigma() * mix.sigma();
  const Vector x0 = x_t + s2 * e.score;
  Matrix j = s2 * e.hessian;
  j.diagonal().array() += 1.0;
  return dps_term(observation, condition, x0, j, jacobian);
}

GuidanceTerm cg_term(const MixtureEval& eval, int class_index) {
  if (class_index < 0 || class_index >= eval.responsibilities.size()) {
    throw ConfigError("class", "class index " + std::to_string(class_index) + " out of range");
  }
  GuidanceTerm out;
  out.g = eval.component_scores.col(class_index) - eval.score;
  out.loss = -(eval.log_terms[class_index] - eval.log_density);
  return out;
}

GuidanceTerm cg_likelihood_score(const ScoreModel& model, int class_index, const Vector& x_t,
                                 int t) {
  if (model.prior().size() < 2) {
    throw ClassificationError("classifier guidance needs at least two components");
  }
  MixtureEval e;
  model.at(t).evaluate(x_t, false, e);
  return cg_term(e, class_index);
}

GuidanceTerm inject_noise(GuidanceTerm term, double zeta, NormalSource& rng) {
  if (!(zeta >= 0.0) || !std::isfinite(zeta)) throw ConfigError("zeta", "must be finite and >= 0");
  const auto d = term.g.size();
  // Always draw so the noise stream stays aligned across zeta values.
  const Vector eps = rng.draw(d);
  if (zeta == 0.0 || d == 0) return term;
  const double scale = zeta * term.g.norm() / std::sqrt(static_cast<double>(d));
  if (scale == 0.0) return term;
  term.g += scale * eps;
  return term;
}

MomentState reset_moments(int dim) {
  return {Vector::Zero(dim), Vector::Zero(dim), 0};
}

void adaptive_moment_update(const Vector& g, MomentState& state, const AdamConfig& config,
                            Vector& g_hat) {
  if (state.k == 0 && state.m.size() == 0) state = reset_moments(static_cast<int>(g.size()));
  require_dim(g, state.m.size(), "adam gradient");
  state.k += 1;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * g;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.k));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.k));
  g_hat = (state.m / c1).array() / ((state.v / c2).array().sqrt() + config.delta);
}

MomentEstimate adaptive_moment_estimate(const Vector& g, MomentState state,
                                        const AdamConfig& config) {
  MomentEstimate out;
  adaptive_moment_update(g, state, config, out.g_hat);
  out.state = std::move(state);
  return out;
}

}  // namespace mgs
