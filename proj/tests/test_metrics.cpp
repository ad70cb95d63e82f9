#include "lndsm/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace lndsm;

TEST_CASE("mode fraction KL") {
  const Eigen::Vector2d p(0.5, 0.5), q(0.25, 0.75);
  CHECK(mode_fraction_kl(p, q, 1e-12) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)));
  CHECK(mode_fraction_kl(p, p) == 0.0);
  // an empty generated mode is finite through smoothing
  CHECK(std::isfinite(mode_fraction_kl(p, Eigen::Vector2d(1.0, 0.0))));
  CHECK_THROWS_AS(mode_fraction_kl(p, Eigen::Vector3d(1, 0, 0)), DimensionError);
  CHECK_THROWS_AS(mode_fraction_kl(p, q, 0.0), ConfigError);

  const ModeFractions m = ModeFractions::from_labels({0, 2, 2, 1, 2}, 3);
  CHECK(m.counts == Eigen::Vector3d(1, 1, 3));
  CHECK(m.fractions.isApprox(Eigen::Vector3d(0.2, 0.2, 0.6)));
  CHECK_THROWS_AS(ModeFractions::from_labels({3}, 3), DimensionError);
}

TEST_CASE("one-dimensional W2 by hand") {
  CHECK(wasserstein2_1d({1, 2, 3}, {3.5, 1.5, 2.5}) == doctest::Approx(0.5));
  CHECK(wasserstein2_1d({0}, {-1, 1}) == doctest::Approx(1.0));
  CHECK(wasserstein2_1d({0, 1}, {0, 0.5, 1}) == doctest::Approx(std::sqrt(1.0 / 12.0)));
  CHECK(wasserstein2_1d({0, 1}, {0, 0.5, 1}) == doctest::Approx(wasserstein2_1d({0, 0.5, 1}, {0, 1})));
  CHECK_THROWS_AS(wasserstein2_1d({}, {1}), DimensionError);
}

TEST_CASE("sliced W2 of a translated cloud") {
  Rng data(1);
  const Eigen::MatrixXd a = data.normal_matrix(300, 2);
  const Eigen::RowVector2d c(3.0, -4.0);
  const Eigen::MatrixXd b = a.rowwise() + c;
  Rng rng(2);
  // E |c . u| over uniform unit u in the plane is 2 |c| / pi.
  CHECK(sliced_wasserstein(a, b, 4000, rng) == doctest::Approx(2.0 * 5.0 / std::numbers::pi).epsilon(0.02));
  Rng r0(3), r1(3), r2(3);
  CHECK(sliced_wasserstein(a, a, 8, r0) == 0.0);
  CHECK(sliced_wasserstein(a, b, 8, r1) == doctest::Approx(sliced_wasserstein(b, a, 8, r2)));
}

TEST_CASE("Frechet distance between Gaussians") {
  const Eigen::Vector2d ma(1, 2), mb(0, 0);
  const Eigen::Matrix2d ca = Eigen::Vector2d(4, 1).asDiagonal(), cb = Eigen::Vector2d(1, 9).asDiagonal();
  // commuting covariances: |dm|^2 + sum (sqrt a - sqrt b)^2
  CHECK(frechet_gaussian(ma, ca, mb, cb) == doctest::Approx(5.0 + 1.0 + 4.0));
  Eigen::Matrix2d full;
  full << 2.0, 0.7, 0.7, 1.0;
  CHECK(frechet_gaussian(mb, full, mb, full) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(frechet_gaussian(ma, full, mb, ca) == doctest::Approx(frechet_gaussian(mb, ca, ma, full)));
}

TEST_CASE("Frechet surrogate with identity features") {
  Rng rng(4);
  const Eigen::MatrixXd a = rng.normal_matrix(20000, 2);
  const Eigen::MatrixXd b = (rng.normal_matrix(20000, 2).array() + 1.0).matrix();
  const auto id = FixedRandomFeatures::identity(2);
  CHECK(frechet_surrogate(a, b, id) == doctest::Approx(2.0).epsilon(0.05));
  const auto f = FixedRandomFeatures::make(2, 16, 7);
  CHECK(f.apply(a.topRows(5)) == FixedRandomFeatures::make(2, 16, 7).apply(a.topRows(5)));
  CHECK(f.apply(a.topRows(5)).cols() == 16);
  CHECK(frechet_surrogate(a, a, f) == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("inception surrogate counts well separated modes") {
  Eigen::VectorXd w(3);
  w << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  Eigen::MatrixXd mu(3, 2), var = Eigen::MatrixXd::Constant(3, 2, 0.01);
  mu << -10, 0, 10, 0, 0, 10;
  const Gmm g(w, mu, var);
  CHECK(inception_surrogate(mu, g) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(inception_surrogate(mu.topRows(1).replicate(5, 1), g) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(inception_surrogate(Eigen::MatrixXd::Zero(2, 3), g), DimensionError);
}
