#include "mgs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mgs/exact.hpp"
#include "mgs/experiments.hpp"
#include "mgs/guidance.hpp"

namespace mgs {

double relative_error(const Vector& a, const Vector& b, double floor) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

double relative_error(const Matrix& a, const Matrix& b, double floor) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

namespace {

constexpr double kStep = 1e-5;

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x) {
  Vector g(x.size());
  Vector p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p[i] = x[i] + kStep;
    const double up = f(p);
    p[i] = x[i] - kStep;
    const double dn = f(p);
    p[i] = x[i];
    g[i] = (up - dn) / (2.0 * kStep);
  }
  return g;
}

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  Vector p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p[i] = x[i] + kStep;
    const Vector up = f(p);
    p[i] = x[i] - kStep;
    const Vector dn = f(p);
    p[i] = x[i];
    j.col(i) = (up - dn) / (2.0 * kStep);
  }
  return j;
}

// log p(y | x_t) written directly as a mixture over components of the
// marginal measurement density, independent of the gradient code.
double log_measurement_density(const GmmPrior& prior, double sigma, const Matrix& a, double sy,
                               const Vector& y, const Vector& x) {
  const int d = prior.dim();
  const Matrix eye = Matrix::Identity(d, d);
  std::vector<double> terms;
  for (const auto& c : prior.components()) {
    const Matrix k = c.covariance + sigma * sigma * eye;
    const Matrix kinv = k.inverse();
    const Vector diff = x - c.mean;
    const double log_px = std::log(c.weight) - 0.5 * diff.dot(kinv * diff) -
                          0.5 * std::log((2.0 * M_PI * k).determinant());
    const Vector m = c.mean + c.covariance * kinv * diff;
    Matrix s = a * (c.covariance - c.covariance * kinv * c.covariance) * a.transpose();
    s += sy * sy * Matrix::Identity(a.rows(), a.rows());
    const Vector r = y - a * m;
    const double log_py = -0.5 * r.dot(s.inverse() * r) - 0.5 * std::log((2.0 * M_PI * s).determinant());
    terms.push_back(log_px + log_py);
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - mx);
  // Subtract log p(x_t) so the result is the likelihood, not the joint.
  return mx + std::log(acc) - NoisedMixture(prior, sigma).log_density(x);
}

}  // namespace

std::vector<GradcheckResult> run_gradchecks(const RunConfig& config, int points, std::uint64_t seed) {
  RunConfig linear = config;
  linear.observation.kind = TaskKind::linear;
  if (!linear.observation.y && !linear.observation.x_true) linear.observation.x_true = Vector::Zero(config.prior.dim());
  const Task task = build_task(linear);
  const ScoreModel& model = task.model;
  const ObservationModel& obs = *task.guidance.observation;
  const Condition& cond = *task.guidance.condition;
  const ObservationModel cls = ObservationModel::classifier(config.prior);
  const int n_classes = config.prior.size();
  const int T = model.schedule().max_index();
  const Matrix a = obs.op().to_dense();

  GradcheckResult score{"prior_score", 0, 0.0, kFirstOrderTolerance};
  GradcheckResult jac{"tweedie_jacobian", 0, 0.0, kSecondOrderTolerance};
  GradcheckResult dps{"dps_likelihood_score", 0, 0.0, kFirstOrderTolerance};
  GradcheckResult dps_cls{"dps_likelihood_score[class]", 0, 0.0, kFirstOrderTolerance};
  GradcheckResult cg{"cg_likelihood_score", 0, 0.0, kFirstOrderTolerance};
  GradcheckResult exact{"exact_likelihood_score", 0, 0.0, kFirstOrderTolerance};
  GradcheckResult quad{"exact_vs_quadrature", 0, 0.0, 1e-3};

  NormalSource rng(seed);
  for (int p = 0; p < points; ++p) {
    const int t = std::min(T, static_cast<int>(rng.uniform() * (T + 1)));
    const double sigma = model.sigma(t);
    const Vector x = config.prior.sample(rng) + sigma * rng.draw(model.dim());
    const NoisedMixture& mix = model.at(t);

    score.max_rel_error = std::max(score.max_rel_error,
        relative_error(model.prior_score(x, t), fd_gradient([&](const Vector& z) { return mix.log_density(z); }, x)));
    ++score.points;

    jac.max_rel_error = std::max(jac.max_rel_error,
        relative_error(model.tweedie_jacobian(x, t),
                       fd_jacobian([&](const Vector& z) { return model.tweedie_denoise(z, t); }, x)));
    ++jac.points;

    auto dps_loss = [&](const ObservationModel& o, const Condition& c) {
      return [&, t](const Vector& z) { return -o.loss_and_gradient(model.tweedie_denoise(z, t), c).loss; };
    };
    dps.max_rel_error = std::max(dps.max_rel_error,
        relative_error(dps_likelihood_score(model, obs, cond, x, t).g, fd_gradient(dps_loss(obs, cond), x)));
    ++dps.points;

    const Condition label = Condition::label(p % n_classes);
    dps_cls.max_rel_error = std::max(dps_cls.max_rel_error,
        relative_error(dps_likelihood_score(model, cls, label, x, t).g, fd_gradient(dps_loss(cls, label), x)));
    ++dps_cls.points;

    const int c = p % n_classes;
    cg.max_rel_error = std::max(cg.max_rel_error,
        relative_error(cg_likelihood_score(model, c, x, t).g,
                       fd_gradient([&](const Vector& z) { return std::log(mix.responsibilities(z)[c]); }, x)));
    ++cg.points;

    const Vector ex = exact_likelihood_score(model, obs, cond, x, t);
    exact.max_rel_error = std::max(exact.max_rel_error,
        relative_error(ex, fd_gradient([&](const Vector& z) {
          return log_measurement_density(config.prior, sigma, a, obs.noise_std(), cond.y(), z);
        }, x)));
    ++exact.points;

    if (model.dim() == 2 && p % 5 == 0) {
      try {
        const Vector q = quadrature_likelihood_score(mix, config.prior, obs, cond, x);
        quad.max_rel_error = std::max(quad.max_rel_error, relative_error(ex, q, 1e-2));
        ++quad.points;
      } catch (const OraclePrecisionError&) {
        // Too fine for the grid at this noise level; skipped.
      }
    }
  }
  std::vector<GradcheckResult> out{score, jac, dps, dps_cls, cg, exact};
  if (quad.points > 0) out.push_back(quad);
  return out;
}

}  // namespace mgs
