#include "lndsm/gmm.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace lndsm;

namespace {

Gmm two_blobs() {
  Eigen::VectorXd w(2);
  w << 0.7, 0.3;
  Eigen::MatrixXd mu(2, 2), var(2, 2);
  mu << -3, 0, 3, 1;
  var << 0.5, 1.0, 0.25, 0.5;
  return Gmm(w, mu, var);
}

double normal_pdf(double x, double m, double v) {
  return std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2 * std::numbers::pi * v);
}

}  // namespace

TEST_CASE("log density matches a direct sum of Gaussian densities") {
  const Gmm g = two_blobs();
  const Eigen::Vector2d z(0.4, -0.7);
  const double direct = 0.7 * normal_pdf(0.4, -3, 0.5) * normal_pdf(-0.7, 0, 1.0) +
                        0.3 * normal_pdf(0.4, 3, 0.25) * normal_pdf(-0.7, 1, 0.5);
  CHECK(gmm_log_density(g, z) == doctest::Approx(std::log(direct)).epsilon(1e-12));
}

TEST_CASE("single component score is -(z - mu) / var") {
  Eigen::VectorXd w(1);
  w << 1.0;
  Eigen::MatrixXd mu(1, 2), var(1, 2);
  mu << 1.0, -2.0;
  var << 0.5, 2.0;
  const Gmm g(w, mu, var);
  const Eigen::VectorXd s = gmm_score(g, Eigen::Vector2d(0.0, 0.0));
  CHECK(s(0) == doctest::Approx(2.0));
  CHECK(s(1) == doctest::Approx(-1.0));
}

TEST_CASE("responsibilities stay finite far from every component") {
  const Gmm g = two_blobs();
  for (double x : {-1e4, -300.0, 300.0, 1e4}) {
    const Eigen::VectorXd r = gmm_responsibilities(g, Eigen::Vector2d(x, x));
    CHECK(r.allFinite());
    CHECK(r.sum() == doctest::Approx(1.0));
    CHECK(gmm_score(g, Eigen::Vector2d(x, x)).allFinite());
  }
}

TEST_CASE("batch score agrees with the per-row score") {
  const Gmm g = two_blobs();
  Rng rng(1);
  const Eigen::MatrixXd z = 3 * rng.normal_matrix(20, 2);
  const Eigen::MatrixXd s = gmm_score_batch(g, z);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    CHECK((s.row(i).transpose() - gmm_score(g, z.row(i).transpose())).norm() < 1e-12);
}

TEST_CASE("constructor rejects invalid parameters") {
  Eigen::VectorXd w(2);
  w << 0.5, 0.6;
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(2, 1), var = Eigen::MatrixXd::Ones(2, 1);
  CHECK_THROWS_AS(Gmm(w, mu, var), NumericalError);
  w << 0.5, 0.5;
  var(1, 0) = 0.0;
  CHECK_THROWS_AS(Gmm(w, mu, var), NumericalError);
  CHECK_THROWS_AS(Gmm(w, Eigen::MatrixXd::Zero(3, 1), Eigen::MatrixXd::Ones(3, 1)), DimensionError);
}

TEST_CASE("sampling frequencies follow the weights") {
  const Gmm g = two_blobs();
  Rng rng(3);
  std::vector<int> comp;
  const int n = 50000;
  gmm_sample(g, n, rng, &comp);
  const double frac = std::count(comp.begin(), comp.end(), 0) / static_cast<double>(n);
  CHECK(std::abs(frac - 0.7) < 4 * std::sqrt(0.7 * 0.3 / n));
}

TEST_CASE("EM recovers well separated components") {
  const Gmm truth = two_blobs();
  Rng rng(4);
  const Eigen::MatrixXd x = gmm_sample(truth, 20000, rng);
  const GmmFitResult fit = gmm_fit(x, 2, rng);
  CHECK(fit.converged);
  const Gmm& m = fit.model;
  const Eigen::Index left = m.means()(0, 0) < m.means()(1, 0) ? 0 : 1;
  CHECK(m.weights()(left) == doctest::Approx(0.7).epsilon(0.02));
  CHECK(m.means()(left, 0) == doctest::Approx(-3.0).epsilon(0.02));
  CHECK(m.variances()(1 - left, 0) == doctest::Approx(0.25).epsilon(0.05));
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
    CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-12);
}

TEST_CASE("monte-carlo entropy of one Gaussian matches the closed form") {
  Eigen::VectorXd w(1);
  w << 1.0;
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(1, 2), var(1, 2);
  var << 0.5, 2.0;
  const Gmm g(w, mu, var);
  Rng rng(6);
  const auto h = gmm_entropy_mc(g, 100000, rng);
  const double exact = 0.5 * (std::log(2 * std::numbers::pi * std::numbers::e * 0.5) +
                              std::log(2 * std::numbers::pi * std::numbers::e * 2.0));
  CHECK(std::abs(h.estimate - exact) < 4 * h.std_error);
}
