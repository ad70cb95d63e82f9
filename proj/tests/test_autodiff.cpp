#include "lndsm/autodiff.hpp"
#include "lndsm/property_suite.hpp"

#include <doctest.h>

#include <cmath>

using namespace lndsm;
namespace ad = lndsm::ad;

TEST_CASE("matmul gradients are the textbook transposes") {
  Rng rng(1);
  const Eigen::MatrixXd a = rng.normal_matrix(3, 4), b = rng.normal_matrix(4, 2), r = rng.normal_matrix(3, 2);
  ad::Tape tape;
  const ad::Var va = tape.parameter(a), vb = tape.parameter(b);
  tape.backward(ad::sum(ad::matmul(va, vb) * tape.constant(r)));
  CHECK((va.grad() - r * b.transpose()).norm() < 1e-12);
  CHECK((vb.grad() - a.transpose() * r).norm() < 1e-12);
}

TEST_CASE("a variable used twice accumulates both paths") {
  ad::Tape tape;
  const ad::Var x = tape.parameter(Eigen::MatrixXd::Constant(1, 1, 3.0));
  tape.backward(ad::sum(x * x + x * 2.0));
  CHECK(x.grad()(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("constants receive no gradient") {
  ad::Tape tape;
  const ad::Var c = tape.constant(Eigen::MatrixXd::Ones(2, 2));
  const ad::Var p = tape.parameter(Eigen::MatrixXd::Ones(2, 2));
  tape.backward(ad::sum(c * p));
  CHECK(c.grad().norm() == 0.0);
  CHECK(p.grad().isApproxToConstant(1.0));
}

TEST_CASE("softplus is stable at large magnitude") {
  ad::Tape tape;
  Eigen::MatrixXd x(1, 3);
  x << -800.0, 0.0, 800.0;
  const ad::Var v = tape.parameter(x);
  const ad::Var y = ad::softplus(v);
  tape.backward(ad::sum(y));
  CHECK(y.value()(0, 0) == doctest::Approx(0.0));
  CHECK(y.value()(0, 1) == doctest::Approx(std::log(2.0)));
  CHECK(y.value()(0, 2) == doctest::Approx(800.0));
  CHECK(v.grad().allFinite());
  CHECK(v.grad()(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("clamp blocks gradient outside the interval") {
  ad::Tape tape;
  Eigen::MatrixXd x(1, 3);
  x << -3.0, 0.2, 5.0;
  const ad::Var v = tape.parameter(x);
  tape.backward(ad::sum(ad::clamp(v, -1.0, 1.0)));
  CHECK(v.grad()(0, 0) == 0.0);
  CHECK(v.grad()(0, 1) == 1.0);
  CHECK(v.grad()(0, 2) == 0.0);
}

TEST_CASE("gather_rows routes gradient to the chosen source") {
  ad::Tape tape;
  const ad::Var a = tape.parameter(Eigen::MatrixXd::Zero(3, 2)), b = tape.parameter(Eigen::MatrixXd::Zero(3, 2));
  tape.backward(ad::sum(ad::gather_rows({a, b}, {0, 1, 1})));
  CHECK(a.grad().row(0).isOnes());
  CHECK(a.grad().bottomRows(2).isZero());
  CHECK(b.grad().row(0).isZero());
  CHECK(b.grad().bottomRows(2).isOnes());
}

TEST_CASE("primitive gradients agree with central differences") {
  Rng rng(2);
  auto weights = [](std::uint64_t seed, Eigen::Index r, Eigen::Index c) {
    Rng w(seed);
    return w.normal_matrix(r, c);
  };
  const TapeFunction f = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    const ad::Var h = ad::swish(ad::add_row(ad::matmul(v[0], v[1]), v[2]));
    const ad::Var s = ad::softplus(ad::scale_rows(h, ad::row_sum(ad::square(v[0]))));
    const ad::Var e = ad::exp(ad::slice_cols(ad::concat_cols(s, v[0]), 1, 2) * 0.3);
    return ad::mean(ad::log(e + 1.0)) + ad::sum(ad::dot_rows(h, t.constant(weights(5, 4, 2))));
  };
  const auto r = check_gradient(f, {rng.normal_matrix(4, 3), rng.normal_matrix(3, 2), rng.normal_matrix(1, 2)});
  CHECK(r.coordinates == 20);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("mixture score backward applies the Hessian") {
  Eigen::VectorXd w(2);
  w << 0.4, 0.6;
  Eigen::MatrixXd mu(2, 2), var(2, 2);
  mu << -1, 0, 1, 0.5;
  var << 0.3, 0.6, 0.5, 0.2;
  const auto g = std::make_shared<const Gmm>(w, mu, var);
  Rng rng(3);
  const TapeFunction f = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    Rng r(4);
    return ad::sum(ad::gmm_score(g, v[0]) * t.constant(r.normal_matrix(6, 2)));
  };
  CHECK(check_gradient(f, {rng.normal_matrix(6, 2)}).max_rel_error < 1e-6);
}

TEST_CASE("gradient checker notices a wrong backward rule") {
  const TapeFunction broken = [](ad::Tape& t, const std::vector<ad::Var>& v) {
    const std::size_t x = v[0].id();
    const ad::Var y = t.record(v[0].value().array().square().matrix(), {v[0]}, [x](ad::Tape& tp, std::size_t self) {
      tp.accumulate(x, tp.grad(self));  // should be 2 x grad
    });
    return ad::sum(y);
  };
  CHECK(check_gradient(broken, {Eigen::MatrixXd::Constant(1, 2, 1.5)}).max_rel_error > 0.1);
}

TEST_CASE("shape mismatches throw") {
  ad::Tape tape;
  const ad::Var a = tape.constant(Eigen::MatrixXd::Zero(2, 3)), b = tape.constant(Eigen::MatrixXd::Zero(3, 2));
  CHECK_THROWS_AS(a + b, DimensionError);
  CHECK_THROWS_AS(ad::matmul(a, a), DimensionError);
}
