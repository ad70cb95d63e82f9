#pragma once

#include "lndsm/errors.hpp"
#include "lndsm/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

namespace lndsm {

/// Diagonal-covariance Gaussian mixture. Immutable once constructed; the
/// per-component log normalisers are cached so queries are cheap.
template <typename Scalar>
class GmmModel {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  GmmModel() = default;

  GmmModel(Vector weights, Matrix means, Matrix variances)
      : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
    const auto k = weights_.size();
    require_dim(k >= 1, "GMM needs at least one component");
    require_dim(means_.rows() == k && variances_.rows() == k,
                "GMM means/variances must have one row per component");
    require_dim(means_.cols() == variances_.cols() && means_.cols() >= 1,
                "GMM means and variances must share a positive dimension");
    if ((weights_.array() <= Scalar(0)).any())
      throw NumericalError("GMM weights must be positive");
    if (std::abs(weights_.sum() - Scalar(1)) > Scalar(1e-12))
      throw NumericalError("GMM weights must sum to 1");
    if ((variances_.array() <= Scalar(0)).any() || !variances_.allFinite() || !means_.allFinite())
      throw NumericalError("GMM variances must be positive and finite");
    const Scalar log2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    log_norm_.resize(k);
    inv_var_ = variances_.cwiseInverse();
    for (Eigen::Index c = 0; c < k; ++c)
      log_norm_(c) = std::log(weights_(c)) -
                     Scalar(0.5) * (variances_.row(c).array().log().sum() + Scalar(dim()) * log2pi);
  }

  Eigen::Index components() const { return weights_.size(); }
  Eigen::Index dim() const { return means_.cols(); }
  const Vector& weights() const { return weights_; }
  const Matrix& means() const { return means_; }
  const Matrix& variances() const { return variances_; }

  /// log(w_k) + log N(z; mu_k, diag v_k) for every component.
  template <typename Derived>
  Vector component_log_terms(const Eigen::MatrixBase<Derived>& z) const {
    require_dim(z.size() == dim(), "GMM query dimension mismatch");
    Vector out(components());
    for (Eigen::Index c = 0; c < components(); ++c) {
      const auto diff = (z.transpose() - means_.row(c)).array();
      out(c) = log_norm_(c) - Scalar(0.5) * (diff.square() * inv_var_.row(c).array()).sum();
    }
    return out;
  }

  const Matrix& inverse_variances() const { return inv_var_; }

 private:
  Vector weights_;
  Matrix means_;
  Matrix variances_;
  Matrix inv_var_;
  Vector log_norm_;
};

using Gmm = GmmModel<double>;

template <typename Scalar>
Scalar log_sum_exp(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& a) {
  const Scalar mx = a.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((a.array() - mx).exp().sum());
}

template <typename Scalar, typename Derived>
Scalar gmm_log_density(const GmmModel<Scalar>& model, const Eigen::MatrixBase<Derived>& z) {
  return log_sum_exp<Scalar>(model.component_log_terms(z));
}

template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gmm_responsibilities(const GmmModel<Scalar>& model,
                                                              const Eigen::MatrixBase<Derived>& z) {
  auto a = model.component_log_terms(z);
  const Scalar lse = log_sum_exp<Scalar>(a);
  return (a.array() - lse).exp().matrix();
}

/// Score of the mixture: sum_k r_k(z) (mu_k - z) / v_k.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gmm_score(const GmmModel<Scalar>& model,
                                                   const Eigen::MatrixBase<Derived>& z) {
  const auto r = gmm_responsibilities(model, z);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(model.dim());
  for (Eigen::Index c = 0; c < model.components(); ++c)
    s.array() += r(c) * (model.means().row(c).transpose() - z).array() *
                 model.inverse_variances().row(c).transpose().array();
  return s;
}

/// Row-wise score for a batch [B x d].
Eigen::MatrixXd gmm_score_batch(const Gmm& model, const Eigen::MatrixXd& z);
Eigen::VectorXd gmm_log_density_batch(const Gmm& model, const Eigen::MatrixXd& z);
/// argmax responsibility per row.
std::vector<int> gmm_assign(const Gmm& model, const Eigen::MatrixXd& z);

/// Component chosen categorically by weight, then a Gaussian draw. For each
/// sample the stream is consumed as: one uniform, then d normals.
Eigen::MatrixXd gmm_sample(const Gmm& model, Eigen::Index n, Rng& rng,
                           std::vector<int>* components = nullptr);

struct GmmFitOptions {
  int max_iters = 200;
  double tol = 1e-8;
  double variance_floor = 1e-6;
};

struct GmmFitResult {
  Gmm model;
  std::vector<double> log_likelihood;  // mean per-point value after each E-step
  int iterations = 0;
  bool converged = false;
  int reseeds = 0;
};

/// EM with k-means++ seeding. A component whose soft count collapses is
/// reseeded on the worst-explained point; a fourth collapse is an error.
GmmFitResult gmm_fit(const Eigen::MatrixXd& data, int k, Rng& rng, const GmmFitOptions& opts = {});

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// -mean log pi(z) over n fresh samples. Used for logging; never enters a loss.
MonteCarloEstimate gmm_entropy_mc(const Gmm& model, Eigen::Index n, Rng& rng);

}  // namespace lndsm
