#pragma once

#include "lndsm/gmm.hpp"
#include "lndsm/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace lndsm {

struct ModeFractions {
  Eigen::VectorXd counts;
  Eigen::VectorXd fractions;

  static ModeFractions from_labels(const std::vector<int>& labels, int modes);
};

/// KL(reference || generated) after adding `smoothing` to every fraction and renormalising.
double mode_fraction_kl(const Eigen::VectorXd& reference, const Eigen::VectorXd& generated, double smoothing = 1e-6);

/// Mean over random unit directions of the 1D 2-Wasserstein distance between
/// the projected samples. Unequal sizes use the exact quantile-function integral.
double sliced_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections, Rng& rng);
double wasserstein2_1d(std::vector<double> a, std::vector<double> b);

/// x -> swish(x W + b) with W ~ N(0, 1/D), b ~ U(-1, 1) drawn from a fixed seed.
class FixedRandomFeatures {
 public:
  static FixedRandomFeatures make(Eigen::Index input_dim, int features = 64, std::uint64_t seed = 17);
  /// Passes inputs through unchanged (used to check against Gaussian closed forms).
  static FixedRandomFeatures identity(Eigen::Index input_dim);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  std::uint64_t seed() const { return seed_; }

 private:
  Eigen::MatrixXd w_;
  Eigen::RowVectorXd b_;
  std::uint64_t seed_ = 0;
  bool identity_ = false;
  Eigen::Index input_dim_ = 0;
};

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
double frechet_gaussian(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                        const Eigen::MatrixXd& cov_b);
double frechet_surrogate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const FixedRandomFeatures& features);

/// exp(mean_z KL(r(.|z) || r_bar)) with GMM responsibilities in place of class posteriors.
double inception_surrogate(const Eigen::MatrixXd& samples, const Gmm& model);

}  // namespace lndsm
