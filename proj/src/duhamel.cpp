#include "qlat/duhamel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qlat/error.hpp"
#include "qlat/quadrature.hpp"

namespace qlat {

Eigen::MatrixXd gaussian_smoothing_matrix(const GridSpec& grid, double y, double s, double t, double h, int hermite,
                                          int interp) {
  const int n = grid.n;
  if (s >= t) return Eigen::MatrixXd::Identity(n, n);
  if (!(s > 0)) throw Error("gaussian propagator requires 0 < s < t");
  if (interp < 2 || interp > n) throw Error("interpolation order must lie in 2..n");
  const QuadRule& gh = gauss_hermite_normalized(hermite);
  const double sig = h * std::sqrt(s * (t - s) / t);
  const double dx = grid.dx();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double m = (1.0 - s / t) * y + (s / t) * grid.x(i);
    for (Eigen::Index q = 0; q < gh.x.size(); ++q) {
      const double p = m + std::sqrt(2.0) * sig * gh.x(q);
      int j0 = static_cast<int>(std::floor((p - grid.x(0)) / dx)) - interp / 2 + 1;
      j0 = std::clamp(j0, 0, n - interp);
      for (int a = 0; a < interp; ++a) {
        double c = 1.0;
        for (int b = 0; b < interp; ++b)
          if (b != a) c *= (p - grid.x(j0 + b)) / (grid.x(j0 + a) - grid.x(j0 + b));
        M(i, j0 + a) += gh.w(q) * c;
      }
    }
  }
  return M;
}

namespace {

// Fourth-order first derivative in the interior, second order at the two outermost points.
Eigen::MatrixXd derivative_matrix(int n, double dx) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  D(0, 0) = -1.5 / dx;
  D(0, 1) = 2.0 / dx;
  D(0, 2) = -0.5 / dx;
  D(n - 1, n - 1) = 1.5 / dx;
  D(n - 1, n - 2) = -2.0 / dx;
  D(n - 1, n - 3) = 0.5 / dx;
  D(1, 0) = -0.5 / dx;
  D(1, 2) = 0.5 / dx;
  D(n - 2, n - 3) = -0.5 / dx;
  D(n - 2, n - 1) = 0.5 / dx;
  for (int i = 2; i < n - 2; ++i) {
    D(i, i - 2) = 1.0 / (12 * dx);
    D(i, i - 1) = -8.0 / (12 * dx);
    D(i, i + 1) = 8.0 / (12 * dx);
    D(i, i + 2) = -1.0 / (12 * dx);
  }
  return D;
}

// Tensor-product action on a flat grid function; site 0 is the slow index.
struct TensorOp {
  std::vector<Eigen::MatrixXd> axes;

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const {
    if (axes.size() == 1) return axes[0] * f;
    const Eigen::Index n = axes[0].rows();
    Eigen::Map<const Eigen::MatrixXd> M(f.data(), n, n);  // M(i1, i0)
    Eigen::MatrixXd R = axes[1] * M * axes[0].transpose();
    return Eigen::Map<Eigen::VectorXd>(R.data(), n * n);
  }
};

Eigen::VectorXd axis_derivative(const Eigen::MatrixXd& D, const Eigen::VectorXd& f, std::size_t sites, std::size_t ax) {
  if (sites == 1) return D * f;
  const Eigen::Index n = D.rows();
  Eigen::Map<const Eigen::MatrixXd> M(f.data(), n, n);
  Eigen::MatrixXd R = ax == 0 ? Eigen::MatrixXd(M * D.transpose()) : Eigen::MatrixXd(D * M);
  return Eigen::Map<Eigen::VectorXd>(R.data(), n * n);
}

struct StepOutcome {
  bool ok = false;
  int sweeps = 0;
  double residual = 0.0;
};

}  // namespace

DuhamelResult duhamel_solve(const InteractionSpec& spec, const Box& lambda, const GridSpec& grid,
                            const std::vector<int>& yIndex, double t, const SolverParams& params) {
  spec.validate();
  grid.validate();
  const SiteSet sites = lambda.sites();
  const std::size_t N = sites.size();
  if (N > 2) throw Error("duhamel engine supports |Lambda| <= 2");
  if (yIndex.size() != N) throw Error("index mismatch: y needs one grid index per site");
  for (int i : yIndex)
    if (i < 0 || i >= grid.n) throw Error("y index outside the grid");
  if (!(t > 0)) throw Error("duhamel solve requires t > 0");
  if (params.nodes < 2) throw Error("need at least two quadrature intervals per step");
  const double h = spec.h;
  const HypothesisConstants hc = hypothesis_constants(spec, lambda);
  if (std::isfinite(hc.T0) && h * t > hc.T0 * (1 + 1e-12)) throw Error("ht exceeds T0");

  const int n = grid.n;
  const std::size_t dim = grid_dimension(n, N);
  std::vector<double> y(N);
  for (std::size_t k = 0; k < N; ++k) y[k] = grid.x(yIndex[k]);

  PotentialEvaluator ev(spec, sites);
  Eigen::VectorXd V(static_cast<Eigen::Index>(dim));
  std::vector<Eigen::VectorXd> dV(N, Eigen::VectorXd(static_cast<Eigen::Index>(dim)));
  std::vector<std::vector<double>> X(dim, std::vector<double>(N));
  for (std::size_t I = 0; I < dim; ++I) {
    std::size_t r = I;
    for (std::size_t ax = N; ax-- > 0;) {
      X[I][ax] = grid.x(static_cast<int>(r % static_cast<std::size_t>(n)));
      r /= static_cast<std::size_t>(n);
    }
    V(static_cast<Eigen::Index>(I)) = ev.value(X[I].data());
    for (std::size_t ax = 0; ax < N; ++ax) dV[ax](static_cast<Eigen::Index>(I)) = ev.grad(X[I].data(), ax);
  }

  DuhamelResult res;
  res.t0 = params.t0Factor * (std::isfinite(hc.T0) ? hc.T0 / h : t);
  if (res.t0 >= t) res.t0 = params.t0Factor * t;

  // Semiclassical start: psi = t0 * segment mean of V, u = t0 * int theta grad V.
  const QuadRule& gl = gauss_legendre01(64);
  Eigen::VectorXd psi(static_cast<Eigen::Index>(dim));
  std::vector<Eigen::VectorXd> u(N, Eigen::VectorXd(static_cast<Eigen::Index>(dim)));
  std::vector<double> p(N);
  for (std::size_t I = 0; I < dim; ++I) {
    double sv = 0.0;
    std::vector<double> sg(N, 0.0);
    for (Eigen::Index q = 0; q < gl.x.size(); ++q) {
      for (std::size_t k = 0; k < N; ++k) p[k] = y[k] + gl.x(q) * (X[I][k] - y[k]);
      sv += gl.w(q) * ev.value(p.data());
      for (std::size_t k = 0; k < N; ++k) sg[k] += gl.w(q) * gl.x(q) * ev.grad(p.data(), k);
    }
    psi(static_cast<Eigen::Index>(I)) = res.t0 * sv;
    for (std::size_t k = 0; k < N; ++k) u[k](static_cast<Eigen::Index>(I)) = res.t0 * sg[k];
  }

  const Eigen::MatrixXd D = derivative_matrix(n, grid.dx());
  const double h2 = 0.5 * h * h;
  const int Nn = params.nodes;

  auto run_step = [&](double ta, double tb, std::vector<std::vector<Eigen::VectorXd>>& U,
                      std::vector<std::vector<TensorOp>>& G, std::vector<double>& s) -> StepOutcome {
    s.resize(static_cast<std::size_t>(Nn + 1));
    const double ds = (tb - ta) / Nn;
    for (int j = 0; j <= Nn; ++j) s[static_cast<std::size_t>(j)] = ta + j * ds;
    s[static_cast<std::size_t>(Nn)] = tb;
    G.assign(static_cast<std::size_t>(Nn + 1), std::vector<TensorOp>(static_cast<std::size_t>(Nn + 1)));
    for (int j = 1; j <= Nn; ++j)
      for (int i = 0; i <= j; ++i)
        for (std::size_t k = 0; k < N; ++k)
          G[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].axes.push_back(
              gaussian_smoothing_matrix(grid, y[k], s[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(j)], h,
                                        params.hermite, params.interp));
    auto W = [&](int i, int j) { return ds * ((i == 0 || i == j) ? 0.5 : 1.0); };

    U.assign(static_cast<std::size_t>(Nn + 1), u);
    std::vector<std::vector<Eigen::VectorXd>> base(static_cast<std::size_t>(Nn + 1), u);
    for (int j = 1; j <= Nn; ++j) {
      const double sj = s[static_cast<std::size_t>(j)];
      for (std::size_t k = 0; k < N; ++k) {
        Eigen::VectorXd b = (ta / sj) * G[0][static_cast<std::size_t>(j)].apply(u[k]);
        for (int i = 0; i <= j; ++i)
          b += W(i, j) * (s[static_cast<std::size_t>(i)] / sj) *
               G[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].apply(dV[k]);
        base[static_cast<std::size_t>(j)][k] = std::move(b);
      }
    }
    StepOutcome out;
    double prev = std::numeric_limits<double>::infinity();
    int growth = 0;
    for (int sw = 1; sw <= params.maxSweeps; ++sw) {
      std::vector<std::vector<Eigen::VectorXd>> F(static_cast<std::size_t>(Nn + 1));
      for (int i = 0; i <= Nn; ++i) {
        Eigen::VectorXd sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
        for (std::size_t k = 0; k < N; ++k) sq += U[static_cast<std::size_t>(i)][k].array().square().matrix();
        for (std::size_t k = 0; k < N; ++k) F[static_cast<std::size_t>(i)].push_back(axis_derivative(D, sq, N, k));
      }
      double change = 0.0;
      std::vector<std::vector<Eigen::VectorXd>> Un = U;
      for (int j = 1; j <= Nn; ++j) {
        const double sj = s[static_cast<std::size_t>(j)];
        for (std::size_t k = 0; k < N; ++k) {
          Eigen::VectorXd v = base[static_cast<std::size_t>(j)][k];
          for (int i = 0; i <= j; ++i)
            v -= W(i, j) * (s[static_cast<std::size_t>(i)] / sj) * h2 *
                 G[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].apply(F[static_cast<std::size_t>(i)][k]);
          change = std::max(change, (v - U[static_cast<std::size_t>(j)][k]).cwiseAbs().maxCoeff());
          Un[static_cast<std::size_t>(j)][k] = std::move(v);
        }
      }
      U.swap(Un);
      out.sweeps = sw;
      out.residual = change;
      if (!std::isfinite(change)) return out;
      if (change <= params.tol) {
        out.ok = true;
        return out;
      }
      growth = change > prev ? growth + 1 : 0;
      if (growth >= 3) return out;
      prev = change;
    }
    out.ok = true;  // sweep budget exhausted without divergence
    return out;
  };

  double ta = res.t0;
  while (ta < t * (1 - 1e-14)) {
    double tb = std::min(2.0 * ta, t);
    std::vector<std::vector<Eigen::VectorXd>> U;
    std::vector<std::vector<TensorOp>> G;
    std::vector<double> s;
    StepOutcome o;
    for (int halving = 0;; ++halving) {
      o = run_step(ta, tb, U, G, s);
      if (o.ok) break;
      if (halving >= params.maxHalvings)
        throw Error("duhamel iteration failed to contract; last residual " + std::to_string(o.residual));
      tb = ta + 0.5 * (tb - ta);
    }
    const double ds = (tb - ta) / Nn;
    Eigen::VectorXd next = G[0][static_cast<std::size_t>(Nn)].apply(psi);
    for (int i = 0; i <= Nn; ++i) {
      Eigen::VectorXd sq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
      for (std::size_t k = 0; k < N; ++k) sq += U[static_cast<std::size_t>(i)][k].array().square().matrix();
      const double w = ds * ((i == 0 || i == Nn) ? 0.5 : 1.0);
      next += w * G[static_cast<std::size_t>(i)][static_cast<std::size_t>(Nn)].apply(V - h2 * sq);
    }
    psi = std::move(next);
    u = U[static_cast<std::size_t>(Nn)];
    res.sweeps.push_back(o.sweeps);
    res.residuals.push_back(o.residual);
    res.stepEnds.push_back(tb);
    ta = tb;
  }
  res.psi = psi;
  res.u = u;
  return res;
}

}  // namespace qlat
