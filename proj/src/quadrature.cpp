#include "lndsm/quadrature.hpp"

#include "lndsm/errors.hpp"

#include <cmath>

namespace lndsm {

namespace {

// Eigen-decomposition of the symmetric Jacobi matrix of a three-term
// recurrence with zero diagonal; weights are mu0 * (first eigvec component)^2.
QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
  const Eigen::Index n = offdiag.size() + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) jacobi(i, i + 1) = jacobi(i + 1, i) = offdiag(i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  if (es.info() != Eigen::Success) throw NumericalError("quadrature: eigen-decomposition failed");
  QuadratureRule rule{es.eigenvalues(), es.eigenvectors().row(0).transpose().array().square() * mu0};
  return rule;
}

}  // namespace

QuadratureRule gauss_legendre(int points, double a, double b) {
  if (points < 1) throw DimensionError("gauss_legendre: need at least one point");
  Eigen::VectorXd off(points - 1);
  for (int k = 1; k < points; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  QuadratureRule rule = golub_welsch(off, 2.0);
  const double half = 0.5 * (b - a);
  rule.nodes = (rule.nodes.array() * half + 0.5 * (a + b)).matrix();
  rule.weights *= half;
  return rule;
}

QuadratureRule gauss_hermite_normal(int points) {
  if (points < 1) throw DimensionError("gauss_hermite_normal: need at least one point");
  // Probabilists' Hermite polynomials: beta_k = k.
  Eigen::VectorXd off(points - 1);
  for (int k = 1; k < points; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  return golub_welsch(off, 1.0);
}

}  // namespace lndsm
