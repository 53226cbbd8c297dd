#pragma once

#include <cstdint>

#include "mgs/linalg.hpp"
#include "mgs/operators.hpp"
#include "mgs/rng.hpp"
#include "mgs/score_model.hpp"

namespace mgs {

// g_t = -grad_{x_t} L(.) and the loss value that produced it.
struct GuidanceTerm {
  Vector g;
  double loss = 0.0;
};

// Adam state: first/second moments and the step counter.
struct MomentState {
  Vector m;
  Vector v;
  long k = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;

  void validate() const;
};

struct NoiseInjectorConfig {
  double zeta = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// How d x_{0|t} / d x_t enters the DPS chain rule.
enum class JacobianMode {
  full,    // exact Tweedie Jacobian
  frozen,  // J := I (ablation)
};

// DPS: g = -J^T grad_{x0} L(x_{0|t}, y) with x_{0|t} the Tweedie estimate.
// Works for gaussian-nll observations and for class labels scored by the
// clean class posterior.
GuidanceTerm dps_likelihood_score(const ScoreModel& model, const ObservationModel& observation,
                                  const Condition& condition, const Vector& x_t, int t,
                                  JacobianMode jacobian = JacobianMode::full);

// DPS chain rule from an already computed Tweedie estimate and Jacobian.
GuidanceTerm dps_term(const ObservationModel& observation, const Condition& condition,
                      const Vector& x0, const Matrix& jacobian, JacobianMode mode);

// Classifier guidance with the exact time-aware classifier: g = grad log r_y(x_t),
// loss = -log r_y(x_t).
GuidanceTerm cg_likelihood_score(const ScoreModel& model, int class_index, const Vector& x_t,
                                 int t);

// CG term from an evaluation of the noised mixture at x_t.
GuidanceTerm cg_term(const MixtureEval& eval, int class_index);

// g + zeta * ||g|| * eps / sqrt(d): the perturbation has RMS norm zeta * ||g||.
GuidanceTerm inject_noise(GuidanceTerm term, double zeta, NormalSource& rng);

MomentState reset_moments(int dim);

struct MomentEstimate {
  Vector g_hat;
  MomentState state;
};

// One adaptive-moment update: k += 1, EMAs of g and g^2, bias correction,
// g_hat = m_hat / (sqrt(v_hat) + delta), all elementwise.
MomentEstimate adaptive_moment_estimate(const Vector& g, MomentState state,
                                        const AdamConfig& config);

// In-place variant used inside the sampler loop.
void adaptive_moment_update(const Vector& g, MomentState& state, const AdamConfig& config,
                            Vector& g_hat);

}  // namespace mgs
