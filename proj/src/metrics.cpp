#include "lndsm/metrics.hpp"

#include "lndsm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lndsm {

ModeFractions ModeFractions::from_labels(const std::vector<int>& labels, int modes) {
  require_dim(modes >= 1, "need at least one mode");
  ModeFractions m{Eigen::VectorXd::Zero(modes), Eigen::VectorXd::Zero(modes)};
  for (int l : labels) {
    require_dim(l >= 0 && l < modes, "mode label out of range");
    m.counts(l) += 1.0;
  }
  if (!labels.empty()) m.fractions = m.counts / static_cast<double>(labels.size());
  return m;
}

double mode_fraction_kl(const Eigen::VectorXd& reference, const Eigen::VectorXd& generated, double smoothing) {
  require_dim(reference.size() == generated.size() && reference.size() > 0, "mode_fraction_kl: length mismatch");
  if (!(smoothing > 0.0)) throw ConfigError("mode_fraction_kl: smoothing must be positive");
  if ((reference.array() < 0).any() || (generated.array() < 0).any())
    throw DataError("mode_fraction_kl: negative fraction");
  Eigen::ArrayXd p = reference.array() + smoothing;
  Eigen::ArrayXd q = generated.array() + smoothing;
  p /= p.sum();
  q /= q.sum();
  return (p * (p / q).log()).sum();
}

double wasserstein2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DimensionError("wasserstein2_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  // Merge the two step quantile functions over [0, 1].
  double sum = 0.0, level = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double next_a = static_cast<double>(i + 1) / na;
    const double next_b = static_cast<double>(j + 1) / nb;
    const double next = std::min(next_a, next_b);
    const double d = a[i] - b[j];
    sum += (next - level) * d * d;
    level = next;
    if (next_a <= next) ++i;
    if (next_b <= next) ++j;
  }
  return std::sqrt(std::max(sum, 0.0));
}

double sliced_wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections, Rng& rng) {
  require_dim(a.cols() == b.cols(), "sliced_wasserstein: dimension mismatch");
  if (a.rows() == 0 || b.rows() == 0) throw DimensionError("sliced_wasserstein: empty batch");
  if (projections < 1) throw ConfigError("sliced_wasserstein: need at least one projection");
  double total = 0.0;
  for (int p = 0; p < projections; ++p) {
    Eigen::VectorXd dir(a.cols());
    for (Eigen::Index j = 0; j < dir.size(); ++j) dir(j) = rng.normal();
    dir.normalize();
    const Eigen::VectorXd pa = a * dir;
    const Eigen::VectorXd pb = b * dir;
    total += wasserstein2_1d({pa.data(), pa.data() + pa.size()}, {pb.data(), pb.data() + pb.size()});
  }
  return total / projections;
}

FixedRandomFeatures FixedRandomFeatures::make(Eigen::Index input_dim, int features, std::uint64_t seed) {
  require_dim(input_dim >= 1 && features >= 1, "feature map needs positive sizes");
  FixedRandomFeatures f;
  Rng rng(seed);
  f.seed_ = seed;
  f.input_dim_ = input_dim;
  f.w_ = rng.normal_matrix(input_dim, features) / std::sqrt(static_cast<double>(input_dim));
  f.b_.resize(features);
  for (int k = 0; k < features; ++k) f.b_(k) = 2.0 * rng.uniform() - 1.0;
  return f;
}

FixedRandomFeatures FixedRandomFeatures::identity(Eigen::Index input_dim) {
  FixedRandomFeatures f;
  f.identity_ = true;
  f.input_dim_ = input_dim;
  return f;
}

Eigen::MatrixXd FixedRandomFeatures::apply(const Eigen::MatrixXd& x) const {
  require_dim(x.cols() == input_dim_, "feature map input dimension mismatch");
  if (identity_) return x;
  const Eigen::ArrayXXd h = ((x * w_).rowwise() + b_).array();
  return (h / (1.0 + (-h).exp())).matrix();
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("frechet: eigendecomposition failed");
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-8 * scale) throw NumericalError("frechet: covariance product is not PSD");
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

void moments(const Eigen::MatrixXd& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  if (x.rows() < 2) throw DimensionError("frechet: need at least two samples");
  mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
  cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
}

}  // namespace

double frechet_gaussian(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                        const Eigen::MatrixXd& cov_b) {
  require_dim(mu_a.size() == mu_b.size() && cov_a.rows() == mu_a.size() && cov_b.rows() == mu_b.size(),
              "frechet: dimension mismatch");
  const Eigen::MatrixXd ra = psd_sqrt(cov_a);
  const Eigen::MatrixXd cross = psd_sqrt(ra * cov_b * ra);
  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
  return std::max(value, 0.0);
}

double frechet_surrogate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const FixedRandomFeatures& features) {
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  moments(features.apply(a), mu_a, cov_a);
  moments(features.apply(b), mu_b, cov_b);
  return frechet_gaussian(mu_a, cov_a, mu_b, cov_b);
}

double inception_surrogate(const Eigen::MatrixXd& samples, const Gmm& model) {
  require_dim(samples.cols() == model.dim(), "inception_surrogate: dimension mismatch");
  if (samples.rows() == 0) throw DimensionError("inception_surrogate: empty batch");
  Eigen::MatrixXd r(samples.rows(), model.components());
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    r.row(i) = gmm_responsibilities(model, samples.row(i).transpose()).transpose();
  const Eigen::RowVectorXd r_bar = r.colwise().mean();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index k = 0; k < r.cols(); ++k) {
      if (r(i, k) > 0.0) kl += r(i, k) * (std::log(r(i, k)) - std::log(r_bar(k)));
    }
  }
  return std::exp(kl / static_cast<double>(r.rows()));
}

}  // namespace lndsm
