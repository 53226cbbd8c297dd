#include "mgs/exact.hpp"

#include <cmath>
#include <numbers>

namespace mgs {

namespace {

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// log N(r; 0, S) and S^{-1} r from a Cholesky factorization.
double gaussian_log_density(const Vector& r, const Matrix& S, Vector& solved) {
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw DegenerateLikelihoodError("measurement covariance is not positive definite");
  }
  solved = llt.solve(r);
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  return -0.5 * (r.dot(solved) + static_cast<double>(r.size()) * std::log(2.0 * std::numbers::pi) +
                 log_det);
}

}  // namespace

Vector exact_likelihood_score(const ScoreModel& model, const ObservationModel& observation,
                              const Condition& condition, const Vector& x_t, int t) {
  return exact_likelihood_score(model.at(t), model.prior(), observation, condition, x_t);
}

Vector exact_likelihood_score(const NoisedMixture& mixture, const GmmPrior& prior,
                              const ObservationModel& observation, const Condition& condition,
                              const Vector& x_t) {
  observation.validate(condition);
  MixtureEval e;
  mixture.evaluate(x_t, false, e);

  if (observation.loss_kind() == LossKind::cross_entropy) {
    // The class and x_t are conditionally independent given x_0, so
    // p(c | x_t) is the noised responsibility itself.
    const int c = condition.class_index();
    return e.component_scores.col(c) - e.score;
  }

  const Matrix a = observation.op().to_dense();
  const Vector& y = condition.y();
  const double sy2 = observation.noise_std() * observation.noise_std();
  const int k = prior.size();
  Vector log_q(k);
  std::vector<Vector> grads(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const auto& comp = prior.component(i);
    const Matrix& prec = mixture.precision(i);        // K_i^{-1}
    const Matrix gain = comp.covariance * prec;       // Sigma_i K_i^{-1}
    const Vector m = comp.mean + gain * (x_t - comp.mean);
    const Matrix post_cov = comp.covariance - gain * comp.covariance;
    Matrix s = a * post_cov * a.transpose();
    s.diagonal().array() += sy2;
    s = 0.5 * (s + s.transpose());
    Vector solved;
    const Vector r = y - a * m;
    const double log_lik = r.size() == 0 ? 0.0 : gaussian_log_density(r, s, solved);
    log_q[i] = e.log_terms[i] + log_lik;
    Vector g = e.component_scores.col(i) - e.score;
    if (r.size() > 0) g += gain.transpose() * (a.transpose() * solved);
    grads[static_cast<std::size_t>(i)] = std::move(g);
  }
  const Vector q = (log_q.array() - log_sum_exp(log_q)).exp();
  Vector out = Vector::Zero(x_t.size());
  for (int i = 0; i < k; ++i) out += q[i] * grads[static_cast<std::size_t>(i)];
  return out;
}

namespace {

struct QuadGrid {
  Vector lo;
  double h0 = 0.0;
  double h1 = 0.0;
  int n = 0;
};

QuadGrid make_grid(const GmmPrior& prior, const QuadratureSpec& spec, double resolve_width) {
  if (prior.dim() != 2) throw UnsupportedError("quadrature oracle is two-dimensional only");
  if (spec.cells < 2) throw ConfigError("quadrature.cells", "must be at least 2");
  auto [lo, hi] = prior.bounding_box(spec.span_stds);
  QuadGrid g{lo, (hi[0] - lo[0]) / spec.cells, (hi[1] - lo[1]) / spec.cells, spec.cells};
  const double h = std::max(g.h0, g.h1);
  if (!(resolve_width >= h)) {
    throw OraclePrecisionError("quadrature cell width " + std::to_string(h) +
                               " cannot resolve an integrand of width " +
                               std::to_string(resolve_width));
  }
  return g;
}

// Posterior-weighted mean of x_0 over the grid with log-weights
// log p(x_0) + log N(x_t; x_0, sigma^2 I) + extra(x_0).
template <class Extra>
Vector weighted_mean(const GmmPrior& prior, const QuadGrid& grid, double sigma, const Vector& x_t,
                     Extra&& extra) {
  const NoisedMixture clean(prior, 0.0);
  MixtureEval e;
  Vector x0(2);
  const double inv2s2 = 0.5 / (sigma * sigma);
  const std::size_t n = static_cast<std::size_t>(grid.n);
  std::vector<double> logw(n * n);
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      x0 << grid.lo[0] + (i + 0.5) * grid.h0, grid.lo[1] + (j + 0.5) * grid.h1;
      clean.evaluate(x0, false, e);
      const double lw = e.log_density - inv2s2 * (x_t - x0).squaredNorm() + extra(x0, e);
      logw[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] = lw;
      best = std::max(best, lw);
    }
  }
  double total = 0.0;
  Vector acc = Vector::Zero(2);
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      const double w = std::exp(logw[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] - best);
      x0 << grid.lo[0] + (i + 0.5) * grid.h0, grid.lo[1] + (j + 0.5) * grid.h1;
      acc += w * x0;
      total += w;
    }
  }
  return acc / total;
}

double narrowest_prior_std(const GmmPrior& prior) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : prior.components()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(c.covariance, Eigen::EigenvaluesOnly);
    best = std::min(best, std::sqrt(es.eigenvalues().minCoeff()));
  }
  return best;
}

}  // namespace

Vector quadrature_posterior_mean(const GmmPrior& prior, double sigma, const Vector& x_t,
                                 const QuadratureSpec& spec) {
  require_dim(x_t, prior.dim(), "x_t");
  const QuadGrid grid = make_grid(prior, spec, std::min(sigma, narrowest_prior_std(prior)));
  return weighted_mean(prior, grid, sigma, x_t, [](const Vector&, const MixtureEval&) { return 0.0; });
}

Vector quadrature_likelihood_score(const NoisedMixture& mixture, const GmmPrior& prior,
                                   const ObservationModel& observation,
                                   const Condition& condition, const Vector& x_t,
                                   const QuadratureSpec& spec) {
  observation.validate(condition);
  require_dim(x_t, prior.dim(), "x_t");
  const double sigma = mixture.sigma();
  double width = std::min(sigma, narrowest_prior_std(prior));
  Vector mean;
  if (observation.loss_kind() == LossKind::gaussian_nll) {
    const Matrix a = observation.op().to_dense();
    const double sy = observation.noise_std();
    if (!(sy > 0.0)) throw DegenerateLikelihoodError("quadrature needs noise_std > 0");
    const double gain = a.size() == 0 ? 0.0 : a.operatorNorm();
    if (gain > 0.0) width = std::min(width, sy / gain);
    const QuadGrid grid = make_grid(prior, spec, width);
    const Vector& y = condition.y();
    const double inv = 0.5 / (sy * sy);
    mean = weighted_mean(prior, grid, sigma, x_t, [&](const Vector& x0, const MixtureEval&) {
      return -inv * (a * x0 - y).squaredNorm();
    });
  } else {
    const QuadGrid grid = make_grid(prior, spec, width);
    const int c = condition.class_index();
    mean = weighted_mean(prior, grid, sigma, x_t, [c](const Vector&, const MixtureEval& e) {
      return e.log_terms[c] - e.log_density;
    });
  }
  return (mean - x_t) / (sigma * sigma) - mixture.score(x_t);
}

GmmPrior exact_posterior(const GmmPrior& prior, const ObservationModel& observation,
                         const Condition& condition) {
  observation.validate(condition);
  if (observation.loss_kind() == LossKind::cross_entropy) {
    // p(x_0 | c) is the c-th component on its own.
    auto comp = prior.component(condition.class_index());
    comp.weight = 1.0;
    return GmmPrior({comp});
  }
  const Matrix a = observation.op().to_dense();
  const Vector& y = condition.y();
  const int d = prior.dim();
  if (a.rows() == 0) return prior;
  const double sy2 = observation.noise_std() * observation.noise_std();
  if (!(sy2 > 0.0)) throw DegenerateLikelihoodError("exact posterior needs noise_std > 0");

  std::vector<GaussianComponent> out;
  Vector log_w(prior.size());
  for (int i = 0; i < prior.size(); ++i) {
    const auto& c = prior.component(i);
    Matrix s = a * c.covariance * a.transpose();
    s.diagonal().array() += sy2;
    Vector solved;
    log_w[i] = std::log(c.weight) + gaussian_log_density(y - a * c.mean, s, solved);
    // Gain form avoids inverting the prior covariance.
    const Matrix gain = c.covariance * a.transpose() * s.llt().solve(Matrix::Identity(s.rows(), s.rows()));
    Vector m = c.mean + gain * (y - a * c.mean);
    Matrix cov = (Matrix::Identity(d, d) - gain * a) * c.covariance;
    cov = 0.5 * (cov + cov.transpose());
    out.push_back({0.0, std::move(m), std::move(cov)});
  }
  const Vector w = (log_w.array() - log_sum_exp(log_w)).exp();
  const double total = w.sum();
  // Components whose weight underflows carry no mass and are dropped.
  std::vector<GaussianComponent> kept;
  for (int i = 0; i < prior.size(); ++i) {
    if (w[i] <= 0.0) continue;
    kept.push_back(std::move(out[static_cast<std::size_t>(i)]));
    kept.back().weight = w[i] / total;
  }
  return GmmPrior(std::move(kept));
}

}  // namespace mgs
