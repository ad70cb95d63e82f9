#pragma once

#include <Eigen/Dense>

namespace lndsm {

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Gauss-Legendre rule mapped to [a, b] (Golub-Welsch).
QuadratureRule gauss_legendre(int points, double a, double b);

/// Gauss-Hermite rule for expectations under N(0, 1): sum w_i h(x_i) ~ E[h(X)].
QuadratureRule gauss_hermite_normal(int points);

}  // namespace lndsm
