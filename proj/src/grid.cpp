#include "qlat/grid.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qlat/error.hpp"

namespace qlat {

const char* stencil_name(Stencil s) { return s == Stencil::central3 ? "central3" : "sineDvr"; }

Stencil parse_stencil(const std::string& s) {
  if (s == "central3") return Stencil::central3;
  if (s == "sineDvr") return Stencil::sineDvr;
  throw Error("unknown stencil '" + s + "'");
}

void GridSpec::validate() const {
  if (!(L > 0)) throw Error("grid half-width L must be positive");
  if (n < 4) throw Error("grid needs at least 4 points per site");
  if (interiorMargin < 1) throw Error("interiorMargin must be at least 1");
  if (!(windowFraction > 0 && windowFraction <= 1)) throw Error("windowFraction must lie in (0,1]");
}

bool GridSpec::in_window(int i) const {
  if (i < interiorMargin || i > n - 1 - interiorMargin) return false;
  return std::abs(x(i)) <= windowFraction * L + 1e-12 * L;
}

std::size_t grid_dimension(int n, std::size_t sites) {
  std::size_t d = 1;
  for (std::size_t k = 0; k < sites; ++k) {
    if (d > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(n))
      return std::numeric_limits<std::size_t>::max();
    d *= static_cast<std::size_t>(n);
  }
  return d;
}

Eigen::MatrixXd kinetic_matrix(const GridSpec& grid, double h) {
  grid.validate();
  const int n = grid.n;
  const double dx = grid.dx();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  if (grid.stencil == Stencil::central3) {
    const double c = 0.5 * h * h / (dx * dx);
    for (int i = 0; i < n; ++i) {
      K(i, i) = 2.0 * c;
      if (i + 1 < n) K(i, i + 1) = K(i + 1, i) = -c;
    }
    return K;
  }
  // Sine basis of the box with walls one spacing beyond +-L.
  const int N = n + 1;
  Eigen::MatrixXd S(n, n);
  Eigen::VectorXd lam(n);
  for (int k = 1; k <= n; ++k) {
    const double q = k * std::numbers::pi / (N * dx);
    lam(k - 1) = 0.5 * h * h * q * q;
    for (int i = 1; i <= n; ++i) S(i - 1, k - 1) = std::sqrt(2.0 / N) * std::sin(std::numbers::pi * i * k / N);
  }
  K = S * lam.asDiagonal() * S.transpose();
  return 0.5 * (K + K.transpose());
}

namespace {

void apply_axis(const Eigen::MatrixXd& K, bool tri, std::size_t dim, int n, std::size_t stride, const double* in,
                double* out) {
  const std::size_t block = stride * static_cast<std::size_t>(n);
  const std::size_t outer = dim / block;
  if (tri) {
    if (stride == 1) {
      for (std::size_t o = 0; o < outer; ++o) {
        const double* c = in + o * block;
        double* r = out + o * block;
        r[0] += K(0, 0) * c[0] + (n > 1 ? K(0, 1) * c[1] : 0.0);
        for (int i = 1; i + 1 < n; ++i) r[i] += K(i, i - 1) * c[i - 1] + K(i, i) * c[i] + K(i, i + 1) * c[i + 1];
        if (n > 1) r[n - 1] += K(n - 1, n - 2) * c[n - 2] + K(n - 1, n - 1) * c[n - 1];
      }
      return;
    }
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = in + o * block;
      double* dst = out + o * block;
      for (int i = 0; i < n; ++i) {
        const double d = K(i, i);
        const double* c = src + static_cast<std::size_t>(i) * stride;
        double* r = dst + static_cast<std::size_t>(i) * stride;
        for (std::size_t s = 0; s < stride; ++s) r[s] += d * c[s];
        if (i > 0) {
          const double lo = K(i, i - 1);
          const double* cl = c - stride;
          for (std::size_t s = 0; s < stride; ++s) r[s] += lo * cl[s];
        }
        if (i + 1 < n) {
          const double hi = K(i, i + 1);
          const double* ch = c + stride;
          for (std::size_t s = 0; s < stride; ++s) r[s] += hi * ch[s];
        }
      }
    }
    return;
  }
  if (stride == 1) {
    Eigen::Map<const Eigen::MatrixXd> M(in, n, static_cast<Eigen::Index>(outer));
    Eigen::Map<Eigen::MatrixXd> R(out, n, static_cast<Eigen::Index>(outer));
    R.noalias() += K * M;
    return;
  }
  for (std::size_t o = 0; o < outer; ++o) {
    Eigen::Map<const Eigen::MatrixXd> M(in + o * block, static_cast<Eigen::Index>(stride), n);
    Eigen::Map<Eigen::MatrixXd> R(out + o * block, static_cast<Eigen::Index>(stride), n);
    R.noalias() += M * K;
  }
}

}  // namespace

void LatticeOperator::apply(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) const {
  if (static_cast<std::size_t>(in.rows()) != dim) throw Error("operator dimension mismatch");
  switch (kind) {
    case Kind::dense:
      out.noalias() = matrix * in;
      return;
    case Kind::kroneckerSum: {
      out.resize(in.rows(), in.cols());
      for (Eigen::Index c = 0; c < in.cols(); ++c) {
        const double* src = in.col(c).data();
        double* dst = out.col(c).data();
        for (std::size_t I = 0; I < dim; ++I) dst[I] = potential(static_cast<Eigen::Index>(I)) * src[I];
        std::size_t stride = 1;
        for (std::size_t ax = 0; ax < sites; ++ax) {
          apply_axis(kinetic, tridiagonal, dim, n, stride, src, dst);
          stride *= static_cast<std::size_t>(n);
        }
      }
      return;
    }
    case Kind::heatAction:
      out = chebyshev_heat(base->as_block_apply(), in, t, base->spectral_bounds());
      return;
  }
}

BlockApply LatticeOperator::as_block_apply() const {
  return [this](const Eigen::MatrixXd& in, Eigen::MatrixXd& out) { apply(in, out); };
}

Eigen::MatrixXd LatticeOperator::to_dense() const {
  if (kind == Kind::dense) return matrix;
  if (kind == Kind::heatAction) throw Error("heat action cannot be densified");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  std::size_t stride = 1;
  for (std::size_t ax = 0; ax < sites; ++ax) {
    for (std::size_t I = 0; I < dim; ++I) {
      const int i = static_cast<int>((I / stride) % static_cast<std::size_t>(n));
      const std::size_t base0 = I - static_cast<std::size_t>(i) * stride;
      for (int j = 0; j < n; ++j) {
        const double k = kinetic(i, j);
        if (k != 0.0) M(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(base0 + j * stride)) += k;
      }
    }
    stride *= static_cast<std::size_t>(n);
  }
  M.diagonal() += potential;
  return M;
}

SpectralInterval LatticeOperator::spectral_bounds() const {
  if (kind == Kind::dense) {
    // Gershgorin discs.
    SpectralInterval s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
      const double r = matrix.row(i).cwiseAbs().sum() - std::abs(matrix(i, i));
      s.lo = std::min(s.lo, matrix(i, i) - r);
      s.hi = std::max(s.hi, matrix(i, i) + r);
    }
    return s;
  }
  if (kind == Kind::heatAction) throw Error("spectral bounds of a heat action are not defined");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kinetic, Eigen::EigenvaluesOnly);
  const double kmin = es.eigenvalues().minCoeff();
  const double kmax = es.eigenvalues().maxCoeff();
  const double pad = 1e-9 * (std::abs(kmax) + potential.cwiseAbs().maxCoeff()) * static_cast<double>(sites);
  return {potential.minCoeff() + static_cast<double>(sites) * kmin - pad,
          potential.maxCoeff() + static_cast<double>(sites) * kmax + pad};
}

namespace {

LatticeOperator assemble(std::size_t sites, const GridSpec& grid, double h, const Eigen::VectorXd& pot,
                         const Budget& budget, bool forceSparse, std::size_t dim) {
  LatticeOperator H;
  H.kind = LatticeOperator::Kind::kroneckerSum;
  H.dim = dim;
  H.sites = sites;
  H.n = grid.n;
  H.h = h;
  H.kinetic = kinetic_matrix(grid, h);
  H.tridiagonal = grid.stencil == Stencil::central3;
  H.potential = pot;
  if (!forceSparse && dim <= budget.dense) {
    H.matrix = H.to_dense();
    H.kind = LatticeOperator::Kind::dense;
  }
  return H;
}

std::size_t checked_dim(const GridSpec& grid, std::size_t sites, const Budget& budget) {
  grid.validate();
  if (sites == 0) throw Error("lattice must contain at least one site");
  const std::size_t dim = grid_dimension(grid.n, sites);
  if (dim > budget.sparse)
    throw BudgetError("budget exceeded: grid dimension " + std::to_string(dim) + " exceeds sparse budget " +
                          std::to_string(budget.sparse),
                      dim);
  return dim;
}

template <class F>
void for_each_point(const GridSpec& grid, std::size_t sites, std::size_t dim, F&& f) {
  std::vector<int> idx(sites, 0);
  std::vector<double> x(sites, grid.x(0));
  for (std::size_t I = 0; I < dim; ++I) {
    f(I, x.data());
    for (std::size_t ax = sites; ax-- > 0;) {
      if (++idx[ax] < grid.n) {
        x[ax] = grid.x(idx[ax]);
        break;
      }
      idx[ax] = 0;
      x[ax] = grid.x(0);
    }
  }
}

}  // namespace

LatticeOperator build_hamiltonian(std::size_t sites, const GridSpec& grid, double h, const GridPotential& V,
                                  const Budget& budget, bool forceSparse) {
  if (!(h > 0)) throw Error("h must be positive");
  const std::size_t dim = checked_dim(grid, sites, budget);
  Eigen::VectorXd pot(static_cast<Eigen::Index>(dim));
  for_each_point(grid, sites, dim, [&](std::size_t I, const double* x) { pot(static_cast<Eigen::Index>(I)) = V(x); });
  return assemble(sites, grid, h, pot, budget, forceSparse, dim);
}

LatticeOperator build_hamiltonian(const InteractionSpec& spec, const Box& lambda, const GridSpec& grid,
                                  const Budget& budget, bool forceSparse) {
  spec.validate();
  const SiteSet s = lambda.sites();
  const std::size_t dim = checked_dim(grid, s.size(), budget);
  PotentialEvaluator ev(spec, s);
  Eigen::VectorXd pot(static_cast<Eigen::Index>(dim));
  double cmin = std::numeric_limits<double>::infinity(), cmax = -cmin;
  for_each_point(grid, s.size(), dim, [&](std::size_t I, const double* x) {
    const double p = ev.pair_value(x);
    cmin = std::min(cmin, p);
    cmax = std::max(cmax, p);
    pot(static_cast<Eigen::Index>(I)) = ev.value(x);
  });
  LatticeOperator H = assemble(s.size(), grid, spec.h, pot, budget, forceSparse, dim);
  Eigen::VectorXd sp(grid.n);
  for (int i = 0; i < grid.n; ++i) sp(i) = spec.site.value(grid.x(i));
  H.sitePotential = sp;
  H.couplingMin = cmin;
  H.couplingMax = cmax;
  return H;
}

namespace {

void require_symmetric(const Eigen::MatrixXd& M) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw Error("operator is not symmetric");
}

}  // namespace

Eigensystem eigensystem(const LatticeOperator& H) {
  Eigen::MatrixXd A = H.to_dense();
  require_symmetric(A);
  const lapack_int n = static_cast<lapack_int>(A.rows());
  Eigensystem es;
  es.values.resize(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, A.data(), n, es.values.data());
  if (info != 0) throw Error("dense eigensolver failed with info " + std::to_string(info));
  es.vectors = std::move(A);
  return es;
}

Eigen::MatrixXd heat_matrix(const Eigensystem& es, double t) {
  if (!(t > 0)) throw Error("heat operator requires t > 0");
  Eigen::VectorXd f = (-t * es.values.array()).exp();
  Eigen::MatrixXd W = es.vectors * f.asDiagonal();
  Eigen::MatrixXd R = W * es.vectors.transpose();
  return 0.5 * (R + R.transpose());
}

LatticeOperator heat_operator(const LatticeOperator& H, double t) {
  if (!(t > 0)) throw Error("heat operator requires t > 0");
  if (H.kind == LatticeOperator::Kind::heatAction) throw Error("heat operator of a heat action is not supported");
  LatticeOperator R;
  R.dim = H.dim;
  R.sites = H.sites;
  R.n = H.n;
  R.h = H.h;
  R.t = t;
  if (H.is_dense()) {
    R.kind = LatticeOperator::Kind::dense;
    R.matrix = heat_matrix(eigensystem(H), t);
    return R;
  }
  require_symmetric(H.kinetic);
  R.kind = LatticeOperator::Kind::heatAction;
  R.base = std::make_shared<const LatticeOperator>(H);
  return R;
}

namespace {

// Normalised single-site off-diagonal profile c(j) = max_i k(i, i +- j) / k(i, i).
std::vector<double> site_decay(const Eigen::MatrixXd& k) {
  const int n = static_cast<int>(k.rows());
  std::vector<double> c(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    if (!(k(i, i) > 0)) throw Error("probing requires a positive single-site heat diagonal");
    for (int j = 0; j < n; ++j) {
      if (k(i, j) < -1e-300) throw Error("probing requires a nonnegative heat kernel (central3 stencil)");
      const std::size_t d = static_cast<std::size_t>(std::abs(i - j));
      c[d] = std::max(c[d], k(i, j) / k(i, i));
    }
  }
  c[0] = 1.0;
  return c;
}

// Sum over nonzero gamma with sum_l w_l gamma_l = 0 mod P of prod_l c(|gamma_l|); w_0 = 1.
double alias_sum(const std::vector<double>& c, const std::vector<long long>& w, long long P, double prune) {
  const int n = static_cast<int>(c.size());
  const std::size_t N = w.size();
  double S = 0.0;
  for (int j = -(n - 1); j <= n - 1; ++j) S += c[static_cast<std::size_t>(std::abs(j))];
  std::vector<double> Spow(N + 1, 1.0);
  for (std::size_t k = 1; k <= N; ++k) Spow[k] = Spow[k - 1] * S;

  double total = 0.0;
  auto rec = [&](auto&& self, std::size_t lam, long long residue, double p, bool allZero) -> void {
    if (lam == N) {
      long long r = ((-residue) % P + P) % P;
      for (long long g = r - ((r + n - 1) / P) * P; g <= n - 1; g += P) {
        if (g < -(n - 1)) continue;
        if (allZero && g == 0) continue;
        total += p * c[static_cast<std::size_t>(std::llabs(g))];
      }
      return;
    }
    const std::size_t remaining = N - lam + 1;  // sites lam..N-1 plus site 0
    if (!allZero && p * Spow[remaining] < prune) {
      total += p * Spow[remaining];
      return;
    }
    for (int g = -(n - 1); g <= n - 1; ++g) {
      const double cg = c[static_cast<std::size_t>(std::abs(g))];
      if (cg == 0.0) continue;
      self(self, lam + 1, (residue + w[lam] * g) % P, p * cg, allZero && g == 0);
    }
  };
  rec(rec, 1, 0, 1.0, true);
  return total;
}

}  // namespace

ProbingResult probe_diagonals(const LatticeOperator& H, double t, const ProbingParams& params) {
  if (!(t > 0)) throw Error("heat operator requires t > 0");
  if (H.kind == LatticeOperator::Kind::heatAction) throw Error("probing requires a Hamiltonian");
  if (!H.sitePotential) throw Error("probing requires a separable single-site reference");
  const int n = H.n;
  const std::size_t N = H.sites;
  const std::size_t dim = H.dim;

  Eigen::MatrixXd hs = H.kinetic;
  hs.diagonal() += *H.sitePotential;
  Eigensystem es1{};
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s(hs);
    es1.values = s.eigenvalues();
    es1.vectors = s.eigenvectors();
  }
  const Eigen::MatrixXd heat1 = heat_matrix(es1, t);
  if (H.couplingMax == H.couplingMin) {
    // Separable up to a constant shift: the diagonals factorise over sites.
    const Eigen::VectorXd d1 = heat1.diagonal();
    const Eigen::VectorXd e1 = (hs * heat1).diagonal();
    const double shift = H.couplingMin;
    const double scale = std::exp(-t * shift);
    ProbingResult res;
    res.heatDiag.resize(static_cast<Eigen::Index>(dim));
    res.energyDiag.resize(static_cast<Eigen::Index>(dim));
    std::vector<int> idx(N, 0);
    for (std::size_t I = 0; I < dim; ++I) {
      double prod = scale, ratio = shift;
      for (std::size_t ax = 0; ax < N; ++ax) {
        prod *= d1(idx[ax]);
        ratio += e1(idx[ax]) / d1(idx[ax]);
      }
      res.heatDiag(static_cast<Eigen::Index>(I)) = prod;
      res.energyDiag(static_cast<Eigen::Index>(I)) = prod * ratio;
      for (std::size_t ax = N; ax-- > 0;) {
        if (++idx[ax] < n) break;
        idx[ax] = 0;
      }
    }
    res.colors = 0;
    return res;
  }
  const std::vector<double> c = site_decay(heat1);
  const double margin = std::exp(t * (H.couplingMax - H.couplingMin));
  const double target = params.tol / margin;

  ProbingResult res;
  std::vector<long long> strides(N);
  {
    long long s = 1;
    for (std::size_t ax = N; ax-- > 0;) {
      strides[ax] = s;
      s *= n;
    }
  }
  std::mt19937_64 rng(params.seed);
  long long P = n;
  bool found = false;
  while (!found) {
    if (static_cast<std::size_t>(P) >= dim || static_cast<std::size_t>(P) > params.maxColors) break;
    std::uniform_int_distribution<long long> dist(1, P - 1);
    for (int attempt = 0; attempt < 8 && !found; ++attempt) {
      std::vector<long long> w(N, 1);
      for (std::size_t l = 1; l < N; ++l) w[l] = dist(rng);
      const double b = alias_sum(c, w, P, 1e-3 * target);
      if (b <= target) {
        found = true;
        res.weights = w;
        res.aliasBound = margin * b;
      }
    }
    if (!found) P = std::max(P + 1, static_cast<long long>(std::ceil(P * 1.15)));
  }
  if (!found) {
    if (static_cast<std::size_t>(P) > params.maxColors && dim > params.maxColors)
      throw BudgetError("probing: colour budget exceeded", dim);
    P = static_cast<long long>(dim);
    res.weights.assign(N, 0);
    for (std::size_t l = 0; l < N; ++l) res.weights[l] = strides[l];
    res.aliasBound = 0.0;
  }
  res.colors = static_cast<std::size_t>(P);

  // Colour of each flat index; axis 0 of the index is site 0.
  std::vector<std::uint32_t> color(dim);
  {
    std::vector<int> idx(N, 0);
    long long col = 0;
    for (std::size_t I = 0; I < dim; ++I) {
      color[I] = static_cast<std::uint32_t>(((col % P) + P) % P);
      for (std::size_t ax = N; ax-- > 0;) {
        if (++idx[ax] < n) {
          col += res.weights[ax];
          break;
        }
        col -= res.weights[ax] * (n - 1);
        idx[ax] = 0;
      }
    }
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(P));
  for (std::size_t I = 0; I < dim; ++I) members[color[I]].push_back(I);

  res.heatDiag.resize(static_cast<Eigen::Index>(dim));
  res.energyDiag.resize(static_cast<Eigen::Index>(dim));
  const BlockApply A = H.as_block_apply();
  const SpectralInterval bounds = H.spectral_bounds();
  const long long bs = std::max(1, params.blockSize);
  for (long long c0 = 0; c0 < P; c0 += bs) {
    const long long cnt = std::min(bs, P - c0);
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), cnt);
    for (long long k = 0; k < cnt; ++k)
      for (std::size_t I : members[static_cast<std::size_t>(c0 + k)]) V(static_cast<Eigen::Index>(I), k) = 1.0;
    int deg = 0;
    Eigen::MatrixXd R = chebyshev_heat(A, V, t, bounds, 1e-17, &deg);
    res.chebyshevDegree = std::max(res.chebyshevDegree, deg);
    Eigen::MatrixXd HR(R.rows(), R.cols());
    A(R, HR);
    for (long long k = 0; k < cnt; ++k)
      for (std::size_t I : members[static_cast<std::size_t>(c0 + k)]) {
        res.heatDiag(static_cast<Eigen::Index>(I)) = R(static_cast<Eigen::Index>(I), k);
        res.energyDiag(static_cast<Eigen::Index>(I)) = HR(static_cast<Eigen::Index>(I), k);
      }
  }
  return res;
}

SlqSamples slq_samples(const LatticeOperator& H, double t, const HutchinsonParams& hp) {
  if (hp.kprobes < 1) throw Error("hutchinson requires kprobes >= 1");
  if (!(t > 0)) throw Error("partition function requires t > 0");
  SlqSamples s;
  const BlockApply A = H.as_block_apply();
  for (int p = 0; p < hp.kprobes; ++p) {
    Eigen::VectorXd v = rademacher(H.dim, hp.seed, static_cast<std::size_t>(p));
    QuadratureRule q = lanczos_quadrature(A, v, hp.lanczosSteps);
    Eigen::ArrayXd f = (-t * q.nodes.array()).exp();
    s.z.push_back((q.weights.array() * f).sum());
    s.e.push_back((q.weights.array() * q.nodes.array() * f).sum());
  }
  return s;
}

TraceEstimate partition_function(const LatticeOperator& H, double t, TraceMethod method, const HutchinsonParams& hp,
                                 const ProbingParams& pp) {
  if (!(t > 0)) throw Error("partition function requires t > 0");
  TraceEstimate r;
  switch (method) {
    case TraceMethod::dense: {
      if (H.kind == LatticeOperator::Kind::heatAction) throw Error("partition function expects a Hamiltonian");
      Eigen::MatrixXd A = H.to_dense();
      require_symmetric(A);
      Eigen::VectorXd w(A.rows());
      const lapack_int n = static_cast<lapack_int>(A.rows());
      if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', n, A.data(), n, w.data()) != 0)
        throw Error("dense eigensolver failed");
      r.value = (-t * w.array()).exp().sum();
      return r;
    }
    case TraceMethod::hutchinson: {
      SlqSamples s = slq_samples(H, t, hp);
      const double k = static_cast<double>(s.z.size());
      double mean = 0.0;
      for (double z : s.z) mean += z;
      mean /= k;
      double var = 0.0;
      for (double z : s.z) var += (z - mean) * (z - mean);
      r.value = mean;
      r.stderr_ = s.z.size() > 1 ? std::sqrt(var / (k - 1) / k) : 0.0;
      r.probes = s.z.size();
      return r;
    }
    case TraceMethod::probing: {
      ProbingResult p = probe_diagonals(H, t, pp);
      r.value = p.heatDiag.sum();
      // Deterministic alias bound in place of a statistical error.
      r.stderr_ = p.aliasBound * r.value;
      r.probes = p.colors;
      return r;
    }
  }
  return r;
}

}  // namespace qlat
