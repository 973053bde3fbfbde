#include "qlat/krylov.hpp"

#include <cmath>
#include <random>

#include "qlat/error.hpp"

namespace qlat {

Eigen::MatrixXd chebyshev_heat(const BlockApply& A, const Eigen::MatrixXd& V, double t,
                               SpectralInterval spec, double tol, int* degreeOut) {
  if (!(t > 0)) throw Error("heat action requires t > 0");
  if (!(spec.hi >= spec.lo)) throw Error("invalid spectral interval");
  const double c = 0.5 * (spec.hi + spec.lo);
  const double r = 0.5 * (spec.hi - spec.lo);
  const double z = t * r;
  if (z > 600) throw Error("chebyshev heat: t * spectral radius too large");
  if (r == 0.0) {
    if (degreeOut) *degreeOut = 0;
    return std::exp(-t * c) * V;
  }
  const double scale = std::exp(-t * spec.lo);
  auto coef = [&](int k) { return std::cyl_bessel_i(static_cast<double>(k), z) * std::exp(-z); };

  Eigen::MatrixXd Tprev = V;
  Eigen::MatrixXd Tcur(V.rows(), V.cols());
  Eigen::MatrixXd AV(V.rows(), V.cols());
  A(V, AV);
  Tcur = (AV - c * V) / r;
  Eigen::MatrixXd out = coef(0) * Tprev - 2.0 * coef(1) * Tcur;
  int k = 1;
  const int maxDeg = static_cast<int>(z) + 400;
  while (true) {
    ++k;
    const double ck = coef(k);
    if (k > z && 2.0 * ck < tol) break;
    if (k > maxDeg) throw Error("chebyshev heat: expansion did not converge");
    A(Tcur, AV);
    Tprev = (2.0 / r) * (AV - c * Tcur) - Tprev;
    out += ((k % 2) ? -2.0 : 2.0) * ck * Tprev;
    Tprev.swap(Tcur);
  }
  if (degreeOut) *degreeOut = k;
  return scale * out;
}

LanczosResult lanczos(const BlockApply& A, const Eigen::VectorXd& v, int steps, bool keepBasis) {
  if (steps < 1) throw Error("lanczos requires at least one step");
  const Eigen::Index n = v.size();
  steps = static_cast<int>(std::min<Eigen::Index>(steps, n));
  LanczosResult res;
  res.norm0 = v.norm();
  if (res.norm0 == 0.0) throw Error("lanczos start vector is zero");
  Eigen::MatrixXd Q(n, steps);
  std::vector<double> alpha, beta;
  Q.col(0) = v / res.norm0;
  Eigen::MatrixXd w(n, 1);
  int m = 0;
  for (int j = 0; j < steps; ++j) {
    A(Q.col(j), w);
    Eigen::VectorXd r = w.col(0);
    const double a = Q.col(j).dot(r);
    alpha.push_back(a);
    m = j + 1;
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::VectorXd h = Q.leftCols(m).transpose() * r;
      r -= Q.leftCols(m) * h;
    }
    const double b = r.norm();
    if (j + 1 == steps || b < 1e-12 * std::max(1.0, std::abs(a))) break;
    beta.push_back(b);
    Q.col(j + 1) = r / b;
  }
  res.alpha = Eigen::Map<Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
  res.beta = Eigen::VectorXd::Zero(std::max(0, m - 1));
  for (int j = 0; j + 1 < m; ++j) res.beta(j) = beta[static_cast<std::size_t>(j)];
  if (keepBasis) res.Q = Q.leftCols(m);
  return res;
}

namespace {

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tridiag_eigen(const LanczosResult& L) {
  const Eigen::Index m = L.alpha.size();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    T(j, j) = L.alpha(j);
    if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = L.beta(j);
  }
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T);
}

}  // namespace

Eigen::VectorXd lanczos_heat(const BlockApply& A, const Eigen::VectorXd& v, double t, int steps) {
  if (!(t > 0)) throw Error("heat action requires t > 0");
  LanczosResult L = lanczos(A, v, steps, true);
  auto es = tridiag_eigen(L);
  const Eigen::VectorXd& th = es.eigenvalues();
  const double shift = th.minCoeff();
  Eigen::VectorXd f = (-(t) * (th.array() - shift)).exp();
  Eigen::VectorXd e1 = es.eigenvectors().row(0).transpose();
  Eigen::VectorXd coeff = es.eigenvectors() * (f.asDiagonal() * e1);
  return (L.norm0 * std::exp(-t * shift)) * (L.Q * coeff);
}

QuadratureRule lanczos_quadrature(const BlockApply& A, const Eigen::VectorXd& v, int steps) {
  LanczosResult L = lanczos(A, v, steps, false);
  auto es = tridiag_eigen(L);
  QuadratureRule q;
  q.nodes = es.eigenvalues();
  q.weights = (L.norm0 * L.norm0) * es.eigenvectors().row(0).transpose().array().square().matrix();
  return q;
}

Eigen::VectorXd rademacher(std::size_t dim, std::uint64_t seed, std::size_t probeIndex) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(probeIndex)};
  std::mt19937_64 rng(seq);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = coin(rng) ? 1.0 : -1.0;
  return v;
}

}  // namespace qlat
