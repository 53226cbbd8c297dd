#pragma once

#include "mgs/gmm.hpp"
#include "mgs/operators.hpp"
#include "mgs/score_model.hpp"

namespace mgs {

// grad_{x_t} log p(y | x_t), marginalizing x_0 exactly. Closed form for the
// linear-Gaussian observation (the joint of (y, x_t) is a mixture of
// Gaussians); the quadrature path handles every other loss.
Vector exact_likelihood_score(const ScoreModel& model, const ObservationModel& observation,
                              const Condition& condition, const Vector& x_t, int t);

// Same quantity at an explicit noise level.
Vector exact_likelihood_score(const NoisedMixture& mixture, const GmmPrior& prior,
                              const ObservationModel& observation, const Condition& condition,
                              const Vector& x_t);

struct QuadratureSpec {
  double span_stds = 6.0;  // bounding box of the prior: means +/- span * max_std
  int cells = 400;         // per axis, midpoint rule
};

// 2-D midpoint quadrature of the likelihood marginalization, using
// grad log p(y|x_t) = (E[x_0 | x_t, y] - x_t) / sigma^2 - score(x_t).
// Throws OraclePrecisionError when the cell width cannot resolve p(x_0|x_t).
Vector quadrature_likelihood_score(const NoisedMixture& mixture, const GmmPrior& prior,
                                   const ObservationModel& observation,
                                   const Condition& condition, const Vector& x_t,
                                   const QuadratureSpec& spec = {});

// E[x_0 | x_t] by the same quadrature grid.
Vector quadrature_posterior_mean(const GmmPrior& prior, double sigma, const Vector& x_t,
                                 const QuadratureSpec& spec = {});

// p(x_0 | y) for a linear-Gaussian observation: per-component conjugate
// updates with reweighted components.
GmmPrior exact_posterior(const GmmPrior& prior, const ObservationModel& observation,
                         const Condition& condition);

}  // namespace mgs
