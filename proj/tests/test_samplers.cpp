#include "lndsm/samplers.hpp"

#include <doctest.h>

#include <cmath>

using namespace lndsm;

namespace {

ScoreFn zero_score() {
  return [](const Eigen::MatrixXd& z, const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(z.rows(), z.cols()).eval(); };
}

double sample_var(const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().sum() / (v.size() - 1.0); }

}  // namespace

TEST_CASE("config validation and defaults") {
  const auto vp = SamplerConfig::defaults_for(DiffusionSpec::vp(0.1, 20.0, 1.0));
  CHECK(vp.t_end == 0.01);
  SamplerConfig bad;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(1.0), ConfigError);
  bad.steps = 10;
  bad.t_end = 1.0;
  CHECK_THROWS_AS(bad.validate(1.0), ConfigError);
}

TEST_CASE("zero drift and zero score leave the ODE state untouched") {
  ForwardCoefficients c;
  c.drift = [](const Eigen::MatrixXd& z, double) { return Eigen::MatrixXd::Zero(z.rows(), z.cols()).eval(); };
  c.diffusion = [](double) { return 1.0; };
  c.horizon = 1.0;
  Rng rng(1);
  const Eigen::MatrixXd z = rng.normal_matrix(50, 3);
  SamplerConfig cfg{SamplerMethod::ProbabilityFlowODE, 17, 0.0};
  CHECK((pf_ode_sample(zero_score(), c, z, cfg) - z).norm() == 0.0);
}

TEST_CASE("exact score of N(0, I) under VP keeps N(0, I)") {
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 2);
  const ScoreFn s = [](const Eigen::MatrixXd& z, const Eigen::VectorXd&) { return Eigen::MatrixXd(-z); };
  const auto c = ForwardCoefficients::from(spec);
  const Eigen::MatrixXd zT = draw_terminal(spec, 10000, 2, 2);
  const Eigen::MatrixXd a = reverse_sde_sample(s, c, zT, SamplerConfig::defaults_for(spec), 3);
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(std::abs(a.col(j).mean()) < 4.0 / 100.0);
    CHECK(std::abs(sample_var(a.col(j)) - 1.0) < 4.0 * std::sqrt(2.0 / 10000.0));
  }
}

TEST_CASE("zero score under VP follows the discrete variance recursion") {
  // z <- (1 + beta h / 2) z + sqrt(beta h) xi, so v <- (1 + beta h / 2)^2 v + beta h.
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 1);
  SamplerConfig cfg{SamplerMethod::ReverseSDE, 50, 0.5};
  const double h = 0.5 / 50;
  double v = 1.0;
  for (int k = 0; k < 50; ++k) {
    const double beta = spec.beta(1.0 - k * h);
    v = (1 + 0.5 * beta * h) * (1 + 0.5 * beta * h) * v + beta * h;
  }
  const Eigen::MatrixXd z =
      reverse_sde_sample(zero_score(), ForwardCoefficients::from(spec), draw_terminal(spec, 20000, 1, 4), cfg, 5);
  CHECK(std::abs(sample_var(z.col(0)) - v) < 4.0 * v * std::sqrt(2.0 / 20000.0));
}

TEST_CASE("Heun converges at second order") {
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 1);
  const ScoreFn s = [](const Eigen::MatrixXd& z, const Eigen::VectorXd& t) {
    // Score of N(0, 4) pushed through VP: variance 4 m^2 + 1 - m^2.
    Eigen::MatrixXd out(z.rows(), 1);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double m2 = std::exp(-(0.1 * t(i) + 0.5 * 19.9 * t(i) * t(i)));
      out(i, 0) = -z(i, 0) / (3.0 * m2 + 1.0);
    }
    return out;
  };
  const auto c = ForwardCoefficients::from(spec);
  Eigen::MatrixXd zT(3, 1);
  zT << -1.5, 0.2, 1.0;
  auto run = [&](int steps) { return pf_ode_sample(s, c, zT, {SamplerMethod::ProbabilityFlowODE, steps, 0.01}); };
  const Eigen::MatrixXd ref = run(2000);
  const double e1 = (run(50) - ref).norm(), e2 = (run(100) - ref).norm();
  CHECK(e1 / e2 >= 3.0);
}

TEST_CASE("same key gives the same batch; samples are independent of batch size") {
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 2);
  const auto c = ForwardCoefficients::from(spec);
  const Eigen::MatrixXd zT = draw_terminal(spec, 8, 2, 9);
  SamplerConfig cfg{SamplerMethod::ReverseSDE, 20, 0.01};
  const Eigen::MatrixXd a = reverse_sde_sample(zero_score(), c, zT, cfg, 11);
  CHECK((a - reverse_sde_sample(zero_score(), c, zT, cfg, 11)).norm() == 0.0);
  const Eigen::MatrixXd head = reverse_sde_sample(zero_score(), c, zT.topRows(3), cfg, 11);
  CHECK((head - a.topRows(3)).norm() == 0.0);
  CHECK((draw_terminal(spec, 3, 2, 9) - zT.topRows(3)).norm() == 0.0);
}

TEST_CASE("Langevin terminal draws come from the reference") {
  Eigen::VectorXd w(2);
  w << 0.8, 0.2;
  Eigen::MatrixXd mu(2, 1), var(2, 1);
  mu << -5.0, 5.0;
  var << 0.1, 0.1;
  const DiffusionSpec spec = DiffusionSpec::langevin(Gmm(w, mu, var), 1.5);
  const Eigen::MatrixXd z = draw_terminal(spec, 20000, 1, 3);
  const double left = (z.array() < 0.0).cast<double>().mean();
  CHECK(std::abs(left - 0.8) < 4.0 * std::sqrt(0.16 / 20000.0));
}

TEST_CASE("decoding preserves order and thresholds Bernoulli output") {
  Rng rng(6);
  VaeModel vae = VaeModel::init(4, 2, 8, 1, Likelihood::BernoulliLogits, 0.1, rng);
  const Eigen::MatrixXd z = rng.normal_matrix(5, 2);
  const DecodedSamples d = decode_samples(vae, z);
  CHECK(d.binary.rows() == 5);
  CHECK(((d.binary.array() == 0.0) || (d.binary.array() == 1.0)).all());
  CHECK((d.binary.array() == (d.values.array() >= 0.5).cast<double>()).all());
  const Eigen::MatrixXd flipped = z.colwise().reverse();
  CHECK((decode_samples(vae, flipped).values - d.values.colwise().reverse()).norm() < 1e-14);
  vae.likelihood = Likelihood::GaussianFixedVar;
  CHECK(decode_samples(vae, z).binary.size() == 0);
}

TEST_CASE("non-finite states are reported") {
  const DiffusionSpec spec = DiffusionSpec::vp(0.1, 20.0, 1.0, 1);
  const ScoreFn wild = [](const Eigen::MatrixXd& z, const Eigen::VectorXd&) { return Eigen::MatrixXd(1e300 * z); };
  CHECK_THROWS_AS(pf_ode_sample(wild, ForwardCoefficients::from(spec), Eigen::MatrixXd::Ones(2, 1),
                                {SamplerMethod::ProbabilityFlowODE, 10, 0.01}),
                  NumericalError);
}
