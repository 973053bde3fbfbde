#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace qlat {

// out = A * in for a symmetric operator acting column-wise on a block of vectors.
using BlockApply = std::function<void(const Eigen::MatrixXd& in, Eigen::MatrixXd& out)>;

struct SpectralInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// exp(-t A) * V by a Chebyshev expansion on [lo, hi] containing the spectrum of A.
// Terminates when the remaining coefficient mass drops below tol * exp(-t lo).
Eigen::MatrixXd chebyshev_heat(const BlockApply& A, const Eigen::MatrixXd& V, double t,
                               SpectralInterval spec, double tol = 1e-16, int* degreeOut = nullptr);

struct LanczosResult {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;  // beta(j) couples q_j and q_{j+1}
  Eigen::MatrixXd Q;     // only filled when keepBasis
  double norm0 = 0.0;
};

// Lanczos tridiagonalisation with full reorthogonalisation.
LanczosResult lanczos(const BlockApply& A, const Eigen::VectorXd& v, int steps, bool keepBasis = false);

// exp(-t A) v through the Lanczos basis.
Eigen::VectorXd lanczos_heat(const BlockApply& A, const Eigen::VectorXd& v, double t, int steps);

// Gauss quadrature nodes and weights of the Lanczos tridiagonal for v^T f(A) v.
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;  // already multiplied by ||v||^2
};
QuadratureRule lanczos_quadrature(const BlockApply& A, const Eigen::VectorXd& v, int steps);

// Rademacher probe with entries +-1 from a seeded stream.
Eigen::VectorXd rademacher(std::size_t dim, std::uint64_t seed, std::size_t probeIndex);

}  // namespace qlat
