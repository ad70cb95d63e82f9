#include "lndsm/sde.hpp"

#include <doctest.h>

#include <cmath>

using namespace lndsm;

TEST_CASE("uniform grid") {
  const TimeGrid g = TimeGrid::uniform(1.5, 100);
  CHECK(g.steps() == 100);
  CHECK(g.t(0) == 0.0);
  CHECK(g.horizon() == 1.5);
  CHECK(g.dt(37) == doctest::Approx(0.015));
  CHECK_THROWS(TimeGrid({0.0, 0.5, 0.4}));
}

TEST_CASE("linear beta schedule integrates in closed form") {
  const DiffusionSpec s = DiffusionSpec::vp(0.1, 20.0, 1.0);
  for (double t : {0.0, 0.3, 1.0}) CHECK(s.beta_integral(t) == doctest::Approx(0.1 * t + 0.5 * 19.9 * t * t));
  CHECK(s.beta(0.5) == doctest::Approx(10.05));
  CHECK(diffusion_coeff(s, 0.5) == doctest::Approx(std::sqrt(10.05)));
}

TEST_CASE("VP drift is -beta z / 2") {
  const DiffusionSpec s = DiffusionSpec::vp(2.0, 2.0, 1.0, 2);
  const Eigen::Vector2d z(1.0, -4.0);
  CHECK((drift(s, z, 0.3) - (-z)).norm() < 1e-15);
}

TEST_CASE("EM recursion holds on every step") {
  Rng rng(1);
  const DiffusionSpec s = DiffusionSpec::vp(0.1, 20.0, 1.0, 2);
  const EmBatch b = em_simulate(s, rng.normal_matrix(5, 2), TimeGrid::uniform(1.0, 20), rng);
  for (int n = 1; n <= 20; ++n) {
    const auto k = static_cast<std::size_t>(n);
    CHECK((b.z[k] - (b.mu[k - 1] + b.sigma(n - 1) * b.u[k - 1])).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(b.sigma(n - 1) == doctest::Approx(std::sqrt(s.beta(b.grid.t(n - 1)) * 0.05)));
  }
  const EmTrajectory tr = b.trajectory(3);
  CHECK((conditional_score(tr, 4) + tr.u.row(3).transpose() / tr.sigma(3)).norm() < 1e-15);
}

TEST_CASE("noise does not depend on the thread count") {
  const DiffusionSpec s = DiffusionSpec::vp(0.1, 20.0, 1.0, 3);
  const Eigen::MatrixXd z0 = Eigen::MatrixXd::Ones(64, 3);
  Rng a(9), b(9);
  const EmBatch one = em_simulate(s, z0, TimeGrid::uniform(1.0, 30), a, 1);
  const EmBatch four = em_simulate(s, z0, TimeGrid::uniform(1.0, 30), b, 4);
  CHECK((one.z.back() - four.z.back()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a == b);
}

TEST_CASE("EM with constant beta settles at the discrete stationary variance") {
  // z' = (1 - beta dt / 2) z + sqrt(beta dt) u has variance 1 / (1 - beta dt / 4).
  const double beta = 4.0, dt = 0.1;
  const DiffusionSpec s = DiffusionSpec::vp(beta, beta, 6.0, 1);
  Rng rng(2);
  const EmBatch b = em_simulate(s, Eigen::MatrixXd::Zero(100000, 1), TimeGrid::uniform(6.0, 60), rng);
  const Eigen::VectorXd z = b.z.back().col(0);
  const double var = z.squaredNorm() / static_cast<double>(z.size());
  const double exact = 1.0 / (1.0 - beta * dt / 4.0);
  CHECK(std::abs(var - exact) < 4 * exact * std::sqrt(2.0 / 100000.0));
}

TEST_CASE("Langevin EM toward one Gaussian has the discrete stationary variance") {
  // pi = N(0, v): z' = (1 - dt / v) z + sqrt(2 dt) u, variance v / (1 - dt / (2 v)).
  const double v = 0.5, dt = 0.05;
  Eigen::VectorXd w(1);
  w << 1.0;
  const Gmm pi(w, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Constant(1, 1, v));
  const DiffusionSpec s = DiffusionSpec::langevin(pi, 5.0);
  Rng rng(3);
  const EmBatch b = em_simulate(s, Eigen::MatrixXd::Zero(100000, 1), TimeGrid::uniform(5.0, 100), rng);
  const Eigen::VectorXd z = b.z.back().col(0);
  const double var = z.squaredNorm() / static_cast<double>(z.size());
  const double exact = v / (1.0 - dt / (2.0 * v));
  CHECK(std::abs(var - exact) < 4 * exact * std::sqrt(2.0 / 100000.0));
}

TEST_CASE("spec validation") {
  CHECK_THROWS(DiffusionSpec::vp(-1.0, 2.0, 1.0).validate());
  CHECK_THROWS(DiffusionSpec::vp(0.1, 20.0, 0.0).validate());
  const DiffusionSpec s = DiffusionSpec::vp(0.1, 20.0, 1.0, 2);
  Rng rng(1);
  CHECK_THROWS_AS(em_simulate(s, Eigen::MatrixXd::Zero(3, 3), TimeGrid::uniform(1.0, 5), rng), DimensionError);
}
