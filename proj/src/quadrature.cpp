#include "qlat/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "qlat/error.hpp"

namespace qlat {

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights come from first eigenvector components.
QuadRule golub_welsch(const Eigen::VectorXd& offdiag, int n, double mu0) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) T(k, k + 1) = T(k + 1, k) = offdiag(k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  QuadRule q;
  q.x = es.eigenvalues();
  q.w = mu0 * es.eigenvectors().row(0).transpose().array().square().matrix();
  return q;
}

std::mutex cacheMutex;

}  // namespace

const QuadRule& gauss_legendre01(int n) {
  if (n < 1) throw Error("quadrature order must be positive");
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(cacheMutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::VectorXd b(std::max(0, n - 1));
  for (int k = 1; k < n; ++k) b(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  QuadRule q = golub_welsch(b, n, 2.0);
  q.x = (q.x.array() + 1.0) * 0.5;
  q.w *= 0.5;
  return cache.emplace(n, std::move(q)).first->second;
}

const QuadRule& gauss_hermite_normalized(int n) {
  if (n < 1) throw Error("quadrature order must be positive");
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(cacheMutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::VectorXd b(std::max(0, n - 1));
  for (int k = 1; k < n; ++k) b(k - 1) = std::sqrt(0.5 * k);
  return cache.emplace(n, golub_welsch(b, n, 1.0)).first->second;
}

}  // namespace qlat
