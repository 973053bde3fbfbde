#pragma once

#include <Eigen/Dense>

namespace qlat {

struct QuadRule {
  Eigen::VectorXd x;
  Eigen::VectorXd w;
};

// Gauss-Legendre rule mapped to [0, 1].
const QuadRule& gauss_legendre01(int n);

// Gauss-Hermite rule for the weight exp(-x^2), weights normalised to sum to 1.
const QuadRule& gauss_hermite_normalized(int n);

}  // namespace qlat
