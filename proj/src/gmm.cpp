#include "lndsm/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lndsm {

Eigen::MatrixXd gmm_score_batch(const Gmm& model, const Eigen::MatrixXd& z) {
  require_dim(z.cols() == model.dim(), "gmm_score_batch: dimension mismatch");
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index b = 0; b < z.rows(); ++b) out.row(b) = gmm_score(model, z.row(b).transpose()).transpose();
  return out;
}

Eigen::VectorXd gmm_log_density_batch(const Gmm& model, const Eigen::MatrixXd& z) {
  require_dim(z.cols() == model.dim(), "gmm_log_density_batch: dimension mismatch");
  Eigen::VectorXd out(z.rows());
  for (Eigen::Index b = 0; b < z.rows(); ++b) out(b) = gmm_log_density(model, z.row(b).transpose());
  return out;
}

std::vector<int> gmm_assign(const Gmm& model, const Eigen::MatrixXd& z) {
  require_dim(z.cols() == model.dim(), "gmm_assign: dimension mismatch");
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index b = 0; b < z.rows(); ++b) {
    Eigen::Index best = 0;
    model.component_log_terms(z.row(b).transpose()).maxCoeff(&best);
    out[static_cast<std::size_t>(b)] = static_cast<int>(best);
  }
  return out;
}

Eigen::MatrixXd gmm_sample(const Gmm& model, Eigen::Index n, Rng& rng, std::vector<int>* components) {
  if (n < 1) throw DimensionError("gmm_sample: n must be >= 1");
  const Eigen::Index k = model.components();
  std::vector<double> cdf(static_cast<std::size_t>(k));
  double acc = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) cdf[static_cast<std::size_t>(c)] = (acc += model.weights()(c));
  cdf.back() = 1.0;

  Eigen::MatrixXd out(n, model.dim());
  if (components) components->assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const auto c = static_cast<Eigen::Index>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const Eigen::Index comp = std::min(c, k - 1);
    for (Eigen::Index j = 0; j < model.dim(); ++j)
      out(i, j) = model.means()(comp, j) + std::sqrt(model.variances()(comp, j)) * rng.normal();
    if (components) (*components)[static_cast<std::size_t>(i)] = static_cast<int>(comp);
  }
  return out;
}

namespace {

// k-means++ seeding: first centre uniform, the rest proportional to squared
// distance to the nearest chosen centre.
Eigen::MatrixXd seed_centres(const Eigen::MatrixXd& data, int k, Rng& rng) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd centres(k, data.cols());
  centres.row(0) = data.row(rng.uniform_int(0, n - 1));
  Eigen::VectorXd d2 = (data.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total <= 0.0) {
      pick = rng.uniform_int(0, n - 1);
    } else {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2(pick);
        if (u < 0.0) break;
      }
    }
    centres.row(c) = data.row(pick);
    d2 = d2.cwiseMin((data.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }
  return centres;
}

struct Estep {
  Eigen::MatrixXd resp;    // n x k
  Eigen::VectorXd loglik;  // per point
};

Estep e_step(const Gmm& model, const Eigen::MatrixXd& data) {
  Estep out{Eigen::MatrixXd(data.rows(), model.components()), Eigen::VectorXd(data.rows())};
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const Eigen::VectorXd a = model.component_log_terms(data.row(i).transpose());
    const double lse = log_sum_exp<double>(a);
    out.loglik(i) = lse;
    out.resp.row(i) = (a.array() - lse).exp().matrix().transpose();
  }
  return out;
}

}  // namespace

GmmFitResult gmm_fit(const Eigen::MatrixXd& data, int k, Rng& rng, const GmmFitOptions& opts) {
  if (k < 1) throw DimensionError("gmm_fit: k must be >= 1");
  if (data.rows() < k) throw DimensionError("gmm_fit: need at least k data points");
  if (!data.allFinite()) throw NumericalError("gmm_fit: non-finite data");
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();

  // Initial hard assignment to the seeded centres.
  const Eigen::MatrixXd centres = seed_centres(data, k, rng);
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    (centres.rowwise() - data.row(i)).rowwise().squaredNorm().minCoeff(&best);
    resp(i, best) = 1.0;
  }

  GmmFitResult result;
  const double min_count = 1e-8 * static_cast<double>(n) + 1e-12;
  Eigen::VectorXd worst_loglik = Eigen::VectorXd::Zero(n);
  bool have_loglik = false;

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // M-step.
    Eigen::VectorXd counts = resp.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts(c) >= min_count) continue;
      if (++result.reseeds > 3) throw NumericalError("gmm_fit: component collapsed repeatedly");
      Eigen::Index far = 0;
      if (have_loglik) {
        worst_loglik.minCoeff(&far);
      } else {
        // No likelihood yet: use the point farthest from the global mean.
        (data.rowwise() - data.colwise().mean()).rowwise().squaredNorm().maxCoeff(&far);
      }
      resp.row(far).setZero();
      resp(far, c) = 1.0;
      counts = resp.colwise().sum().transpose();
    }
    Eigen::VectorXd weights = counts / static_cast<double>(n);
    weights /= weights.sum();
    Eigen::MatrixXd means(k, d), vars(k, d);
    const Eigen::RowVectorXd global_var =
        (data.rowwise() - data.colwise().mean()).array().square().colwise().mean();
    for (Eigen::Index c = 0; c < k; ++c) {
      const Eigen::VectorXd w = resp.col(c);
      means.row(c) = (w.transpose() * data) / counts(c);
      const Eigen::MatrixXd centred = data.rowwise() - means.row(c);
      vars.row(c) = (w.transpose() * centred.array().square().matrix()) / counts(c);
      // A single-point component has zero spread; fall back to the data scale.
      if (counts(c) < 1.5) vars.row(c) = global_var;
    }
    vars = vars.cwiseMax(opts.variance_floor);
    result.model = Gmm(weights, means, vars);

    // E-step.
    Estep es = e_step(result.model, data);
    const double ll = es.loglik.mean();
    resp = std::move(es.resp);
    worst_loglik = es.loglik;
    have_loglik = true;
    result.iterations = iter + 1;
    const bool improved_little = !result.log_likelihood.empty() && ll - result.log_likelihood.back() < opts.tol;
    result.log_likelihood.push_back(ll);
    if (improved_little) {
      result.converged = true;
      break;
    }
  }
  return result;
}

MonteCarloEstimate gmm_entropy_mc(const Gmm& model, Eigen::Index n, Rng& rng) {
  if (n < 2) throw DimensionError("gmm_entropy_mc: n must be >= 2");
  const Eigen::MatrixXd z = gmm_sample(model, n, rng);
  const Eigen::VectorXd lp = gmm_log_density_batch(model, z);
  const double mean = lp.mean();
  const double var = (lp.array() - mean).square().sum() / static_cast<double>(n - 1);
  return {-mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace lndsm
