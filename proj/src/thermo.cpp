#include "qlat/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "qlat/error.hpp"

namespace qlat {

namespace {

std::size_t ipow(int n, std::size_t k) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < k; ++i) r *= static_cast<std::size_t>(n);
  return r;
}

// Position of each support site inside lambda.
std::vector<std::size_t> positions(const SiteSet& lambda, const SiteSet& support) {
  std::vector<std::size_t> pos;
  for (const auto& s : support) {
    auto it = std::lower_bound(lambda.begin(), lambda.end(), s);
    if (it == lambda.end() || *it != s) throw Error("support not contained in Lambda");
    pos.push_back(static_cast<std::size_t>(it - lambda.begin()));
  }
  return pos;
}

bool disjoint(const SiteSet& a, const SiteSet& b) {
  for (const auto& s : a)
    if (std::binary_search(b.begin(), b.end(), s)) return false;
  return true;
}

}  // namespace

Observable Observable::multiplication(SiteSet support, const GridSpec& grid,
                                      const std::function<double(const double*)>& f) {
  support = make_site_set(std::move(support));
  const std::size_t k = support.size();
  const std::size_t dim = ipow(grid.n, k);
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  std::vector<double> x(k);
  for (std::size_t I = 0; I < dim; ++I) {
    std::size_t r = I;
    for (std::size_t a = k; a-- > 0;) {
      x[a] = grid.x(static_cast<int>(r % static_cast<std::size_t>(grid.n)));
      r /= static_cast<std::size_t>(grid.n);
    }
    v(static_cast<Eigen::Index>(I)) = f(x.data());
  }
  return multiplication(std::move(support), grid.n, std::move(v));
}

Observable Observable::multiplication(SiteSet support, int n, Eigen::VectorXd values) {
  Observable o;
  o.support = make_site_set(std::move(support));
  o.repr = Repr::multiplication;
  o.n = n;
  if (static_cast<std::size_t>(values.size()) != ipow(n, o.support.size()))
    throw Error("observable size does not match its support");
  o.values = std::move(values);
  o.opNorm = o.values.size() ? o.values.cwiseAbs().maxCoeff() : 0.0;
  return o;
}

Observable Observable::dense(SiteSet support, int n, Eigen::MatrixXd matrix) {
  Observable o;
  o.support = make_site_set(std::move(support));
  o.repr = Repr::dense;
  o.n = n;
  const auto dim = static_cast<Eigen::Index>(ipow(n, o.support.size()));
  if (matrix.rows() != dim || matrix.cols() != dim) throw Error("observable size does not match its support");
  o.matrix = std::move(matrix);
  o.opNorm = Eigen::BDCSVD<Eigen::MatrixXd>(o.matrix).singularValues()(0);
  return o;
}

std::size_t Observable::local_dim() const { return ipow(n, support.size()); }

Eigen::MatrixXd Observable::as_matrix() const {
  if (repr == Repr::dense) return matrix;
  return values.asDiagonal();
}

Observable disjoint_product(const Observable& a, const Observable& b) {
  if (!disjoint(a.support, b.support)) throw Error("overlapping supports");
  if (a.n != b.n) throw Error("observables live on different grids");
  SiteSet u = a.support;
  u.insert(u.end(), b.support.begin(), b.support.end());
  u = make_site_set(std::move(u));
  const auto ia = support_indices(u, a.support, a.n);
  const auto ib = support_indices(u, b.support, b.n);
  const auto dim = static_cast<Eigen::Index>(ia.size());
  if (a.repr == Observable::Repr::multiplication && b.repr == Observable::Repr::multiplication) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index I = 0; I < dim; ++I)
      v(I) = a.values(static_cast<Eigen::Index>(ia[static_cast<std::size_t>(I)])) *
             b.values(static_cast<Eigen::Index>(ib[static_cast<std::size_t>(I)]));
    Observable o = Observable::multiplication(u, a.n, std::move(v));
    return o;
  }
  const Eigen::MatrixXd A = a.as_matrix(), B = b.as_matrix();
  Eigen::MatrixXd M(dim, dim);
  for (Eigen::Index J = 0; J < dim; ++J)
    for (Eigen::Index I = 0; I < dim; ++I) {
      const auto i = static_cast<std::size_t>(I), j = static_cast<std::size_t>(J);
      M(I, J) = A(static_cast<Eigen::Index>(ia[i]), static_cast<Eigen::Index>(ia[j])) *
                B(static_cast<Eigen::Index>(ib[i]), static_cast<Eigen::Index>(ib[j]));
    }
  Observable o;
  o.support = u;
  o.repr = Observable::Repr::dense;
  o.n = a.n;
  o.matrix = std::move(M);
  o.opNorm = a.opNorm * b.opNorm;
  return o;
}

std::vector<std::size_t> support_indices(const SiteSet& lambda, const SiteSet& support, int n) {
  const auto pos = positions(lambda, support);
  const std::size_t N = lambda.size(), dim = ipow(n, N);
  std::vector<std::size_t> out(dim);
  std::vector<std::size_t> digits(N);
  for (std::size_t I = 0; I < dim; ++I) {
    std::size_t r = I;
    for (std::size_t a = N; a-- > 0;) {
      digits[a] = r % static_cast<std::size_t>(n);
      r /= static_cast<std::size_t>(n);
    }
    std::size_t e = 0;
    for (auto p : pos) e = e * static_cast<std::size_t>(n) + digits[p];
    out[I] = e;
  }
  return out;
}

GibbsState GibbsState::dense(const LatticeOperator& H, const SiteSet& lambda, double t) {
  if (!(t > 0)) throw Error("Gibbs state requires t > 0");
  if (lambda.size() != H.sites) throw Error("index mismatch: site list does not match operator");
  GibbsState g;
  g.sites_ = lambda;
  g.n_ = H.n;
  g.t_ = t;
  Eigensystem es = eigensystem(H);
  const double e0 = es.values.minCoeff();
  Eigen::VectorXd w = (-t * (es.values.array() - e0)).exp().matrix();
  g.heat_ = es.vectors * w.asDiagonal() * es.vectors.transpose();
  g.diag_ = g.heat_.diagonal();
  g.trace_ = w.sum();
  g.logZ_ = -t * e0 + std::log(g.trace_);
  g.meanEnergy_ = -es.values.dot(w) / g.trace_;
  return g;
}

GibbsState GibbsState::probed(const LatticeOperator& H, const SiteSet& lambda, double t, const ProbingParams& pp) {
  if (!(t > 0)) throw Error("Gibbs state requires t > 0");
  if (lambda.size() != H.sites) throw Error("index mismatch: site list does not match operator");
  GibbsState g;
  g.sites_ = lambda;
  g.n_ = H.n;
  g.t_ = t;
  ProbingResult p = probe_diagonals(H, t, pp);
  g.diag_ = p.heatDiag;
  g.trace_ = p.heatDiag.sum();
  g.logZ_ = std::log(g.trace_);
  g.meanEnergy_ = -p.energyDiag.sum() / g.trace_;
  g.aliasBound_ = p.aliasBound;
  return g;
}

GibbsState GibbsState::automatic(const LatticeOperator& H, const SiteSet& lambda, double t, const ProbingParams& pp) {
  return H.is_dense() ? dense(H, lambda, t) : probed(H, lambda, t, pp);
}

void GibbsState::check_support(const Observable& a) const {
  if (a.n != n_) throw Error("observable grid does not match the state");
  positions(sites_, a.support);
}

double GibbsState::mean(const Observable& a) const {
  check_support(a);
  const auto idx = support_indices(sites_, a.support, n_);
  if (a.repr == Observable::Repr::multiplication) {
    double s = 0.0;
    for (std::size_t I = 0; I < idx.size(); ++I) s += diag_(static_cast<Eigen::Index>(I)) * a.values(static_cast<Eigen::Index>(idx[I]));
    return s / trace_;
  }
  if (!full()) throw Error("dense observable requires the full heat matrix");
  // Tr(heat * A), A acting as identity off the support.
  const auto pos = positions(sites_, a.support);
  const std::size_t N = sites_.size(), k = pos.size();
  std::vector<std::size_t> stride(k);
  for (std::size_t j = 0; j < k; ++j) stride[j] = ipow(n_, N - 1 - pos[j]);
  const std::size_t ld = a.local_dim();
  std::vector<std::size_t> off(ld);
  for (std::size_t e = 0; e < ld; ++e) {
    std::size_t r = e, o = 0;
    for (std::size_t j = k; j-- > 0;) {
      o += (r % static_cast<std::size_t>(n_)) * stride[j];
      r /= static_cast<std::size_t>(n_);
    }
    off[e] = o;
  }
  double s = 0.0;
  for (std::size_t I = 0; I < idx.size(); ++I) {
    const std::size_t base = I - off[idx[I]];
    const auto ei = static_cast<Eigen::Index>(idx[I]);
    for (std::size_t e = 0; e < ld; ++e)
      s += heat_(static_cast<Eigen::Index>(base + off[e]), static_cast<Eigen::Index>(I)) *
           a.matrix(ei, static_cast<Eigen::Index>(e));
  }
  return s / trace_;
}

double GibbsState::covariance(const Observable& a, const Observable& b) const {
  if (!disjoint(a.support, b.support)) throw Error("overlapping supports");
  return mean(disjoint_product(a, b)) - mean(a) * mean(b);
}

double gibbs_mean(const LatticeOperator& H, const SiteSet& lambda, const Observable& a, double t) {
  return GibbsState::automatic(H, lambda, t).mean(a);
}

double covariance(const LatticeOperator& H, const SiteSet& lambda, const Observable& a, const Observable& b, double t) {
  return GibbsState::automatic(H, lambda, t).covariance(a, b);
}

TraceEstimate mean_energy(const LatticeOperator& H, double t, EnergyMethod method, const HutchinsonParams& hp,
                          const ProbingParams& pp) {
  if (!(t > 0)) throw Error("mean energy requires t > 0");
  TraceEstimate r;
  switch (method) {
    case EnergyMethod::dense: {
      Eigensystem es = eigensystem(H);
      const double e0 = es.values.minCoeff();
      Eigen::ArrayXd w = (-t * (es.values.array() - e0)).exp();
      r.value = -(es.values.array() * w).sum() / w.sum();
      return r;
    }
    case EnergyMethod::stochastic: {
      SlqSamples s = slq_samples(H, t, hp);
      const double k = static_cast<double>(s.z.size());
      double sz = 0, se = 0;
      for (std::size_t i = 0; i < s.z.size(); ++i) {
        sz += s.z[i];
        se += s.e[i];
      }
      const double ratio = se / sz;
      double var = 0.0;
      for (std::size_t i = 0; i < s.z.size(); ++i) {
        const double d = s.e[i] - ratio * s.z[i];
        var += d * d;
      }
      r.value = -ratio;
      r.stderr_ = s.z.size() > 1 ? std::sqrt(var / (k - 1) / k) / (sz / k) : 0.0;
      r.probes = s.z.size();
      return r;
    }
    case EnergyMethod::probing: {
      ProbingResult p = probe_diagonals(H, t, pp);
      r.value = -p.energyDiag.sum() / p.heatDiag.sum();
      r.stderr_ = p.aliasBound * std::abs(r.value);
      r.probes = p.colors;
      return r;
    }
  }
  return r;
}

DecayFit fit_decay(std::vector<DecayRowCov> rows, double t) {
  DecayFit f;
  f.rows = std::move(rows);
  f.monotone = true;
  for (std::size_t i = 1; i < f.rows.size(); ++i)
    if (std::abs(f.rows[i].cov) > std::abs(f.rows[i - 1].cov)) f.monotone = false;
  std::vector<double> xs, ys;
  for (const auto& r : f.rows)
    if (std::abs(r.cov) > kCovarianceFloor) {
      xs.push_back(r.distance);
      ys.push_back(std::log(std::abs(r.cov)));
    }
  if (xs.empty()) {
    f.status = "signal underflow";
    return f;
  }
  if (xs.size() < 2) {
    f.status = "insufficient signal";
    return f;
  }
  const double k = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / k;
    my += ys[i] / k;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  f.fittedDelta = std::exp(slope);
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  for (const auto& r : f.rows) f.empiricalN.push_back(std::abs(r.cov) / (t * std::pow(f.fittedDelta, r.distance)));
  f.status = "ok";
  return f;
}

DecayFit decay_sweep(const InteractionSpec& spec, int chainLength, double t, const GridSpec& grid,
                     const DecaySweepOptions& opt) {
  if (spec.d != 1) throw Error("decay sweep supports d = 1");
  if (chainLength < 2) throw Error("decay sweep needs at least two sites");
  const Box lambda = Box::interval(0, chainLength - 1);
  const SiteSet sites = lambda.sites();
  LatticeOperator H = build_hamiltonian(spec, lambda, grid, opt.budget);
  GibbsState g = GibbsState::automatic(H, sites, t, opt.probing);
  auto fa = opt.a;
  auto fb = opt.b;
  Observable A = Observable::multiplication({Site{0}}, grid, [&](const double* x) { return fa(x[0]); });
  std::vector<DecayRowCov> rows;
  for (int r = 1; r < chainLength; ++r) {
    Observable B = Observable::multiplication({Site{r}}, grid, [&](const double* x) { return fb(x[0]); });
    rows.push_back({r, g.covariance(A, B)});
  }
  return fit_decay(std::move(rows), t);
}

std::vector<ThermoRow> thermo_sweep(const InteractionSpec& spec, const std::vector<int>& nRange, double t,
                                    const GridSpec& grid, const ThermoSweepOptions& opt) {
  if (spec.d != 1) throw Error("thermo sweep supports d = 1");
  std::vector<ThermoRow> rows;
  auto energy = [&](const Box& b) {
    LatticeOperator H = build_hamiltonian(spec, b, grid, opt.budget);
    return GibbsState::automatic(H, b.sites(), t, opt.probing).mean_energy();
  };
  auto fa = opt.a;
  for (int n : nRange) {
    ThermoRow row;
    row.n = n;
    const Box lambda = Box::interval(-n, n);
    row.sites = lambda.size();
    row.dim = grid_dimension(grid.n, row.sites);
    try {
      LatticeOperator H = build_hamiltonian(spec, lambda, grid, opt.budget);
      GibbsState g = GibbsState::automatic(H, lambda.sites(), t, opt.probing);
      row.method = g.full() ? "dense" : "probing";
      Observable A = Observable::multiplication({Site{0}}, grid, [&](const double* x) { return fa(x[0]); });
      row.meanA = g.mean(A);
      const double X = g.mean_energy();
      row.energyPerSite = X / static_cast<double>(row.sites);
      row.splitDefect = n >= 1 ? std::abs(X - energy(Box::interval(-n, 0)) - energy(Box::interval(1, n)))
                               : std::numeric_limits<double>::quiet_NaN();
    } catch (const BudgetError& e) {
      row.status = "budget exceeded";
      row.method = "none";
      rows.push_back(row);
      break;
    }
    rows.push_back(row);
  }
  return rows;
}

namespace {

struct Split {
  Box lambda;
  int axis = 0;
  bool firstBelow = true;
};

Split check_split(const Box& l1, const Box& l2) {
  if (l1.dim() != l2.dim()) throw Error("non-adjacent split");
  Split s;
  int differing = -1;
  for (int a = 0; a < l1.dim(); ++a) {
    const auto ua = static_cast<std::size_t>(a);
    if (l1.lo[ua] == l2.lo[ua] && l1.hi[ua] == l2.hi[ua]) continue;
    if (differing >= 0) throw Error("non-adjacent split");
    differing = a;
  }
  if (differing < 0) throw Error("non-adjacent split");
  const auto ua = static_cast<std::size_t>(differing);
  if (l1.hi[ua] + 1 == l2.lo[ua]) {
    s.firstBelow = true;
  } else if (l2.hi[ua] + 1 == l1.lo[ua]) {
    s.firstBelow = false;
  } else {
    throw Error("non-adjacent split");
  }
  std::vector<int> lo = l1.lo, hi = l1.hi;
  lo[ua] = std::min(l1.lo[ua], l2.lo[ua]);
  hi[ua] = std::max(l1.hi[ua], l2.hi[ua]);
  s.lambda = Box(lo, hi);
  s.axis = differing;
  return s;
}

}  // namespace

KernelField theta_kernel(const InteractionSpec& spec, const Box& l1, const Box& l2, double t, const GridSpec& grid,
                         double theta) {
  const Split sp = check_split(l1, l2);
  const SiteSet sites = sp.lambda.sites();
  PotentialEvaluator ev(spec, sites);
  std::vector<std::pair<std::size_t, std::size_t>> cross;
  std::vector<int> dist;
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = 0; j < sites.size(); ++j)
      if (l1.contains(sites[i]) && l2.contains(sites[j])) {
        cross.emplace_back(i, j);
        dist.push_back(linf_dist(sites[i], sites[j]));
      }
  // V counts each unordered pair twice, so full decoupling removes twice the one-sided sum.
  auto V = [&](const double* x) {
    double inter = 0.0;
    for (std::size_t k = 0; k < cross.size(); ++k)
      inter += spec.pair.coupling(dist[k], x[cross[k].first], x[cross[k].second]);
    return ev.value(x) - 2.0 * theta * inter;
  };
  LatticeOperator H = build_hamiltonian(sites.size(), grid, spec.h, V);
  if (!H.is_dense()) throw BudgetError("theta interpolation requires dense", H.dim);
  return spectral_kernel(eigensystem(H), grid, sites.size(), t, spec.h);
}

std::vector<ThetaRow> theta_interpolation(const InteractionSpec& spec, const Box& l1, const Box& l2, double t,
                                          const GridSpec& grid, const std::vector<double>& thetas, double dtheta) {
  const Split sp = check_split(l1, l2);
  if (!(dtheta > 0)) throw Error("theta step must be positive");
  const SiteSet sites = sp.lambda.sites();
  const auto ax = static_cast<std::size_t>(sp.axis);
  std::map<double, KernelField> cache;
  auto kernel = [&](double th) -> const KernelField& {
    auto it = cache.find(th);
    if (it == cache.end()) it = cache.emplace(th, theta_kernel(spec, l1, l2, t, grid, th)).first;
    return it->second;
  };
  std::vector<ThetaRow> rows;
  for (double th : thetas) {
    const KernelField& kp = kernel(th + dtheta);
    const KernelField& km = kernel(th - dtheta);
    KernelField d = kp;
    d.mask = kp.mask && km.mask;
    d.psi = (kp.psi - km.psi) / (2.0 * dtheta);
    ThetaRow row;
    row.theta = th;
    for (Eigen::Index J = 0; J < d.psi.cols(); ++J)
      for (Eigen::Index I = 0; I < d.psi.rows(); ++I)
        if (d.mask(I, J)) row.supDtheta = std::max(row.supDtheta, std::abs(d.psi(I, J)));
    for (std::size_t l = 0; l < sites.size(); ++l) {
      const bool inFirst = l1.contains(sites[l]);
      const bool below = inFirst == sp.firstBelow;
      const Box& own = inFirst ? l1 : l2;
      row.distBySite.push_back(below ? own.hi[ax] - sites[l].c[ax] : sites[l].c[ax] - own.lo[ax]);
      std::vector<int> mult(2 * sites.size(), 0);
      mult[l] = 1;
      double g = 0.0;
      for (Eigen::Index J = 0; J < d.psi.cols(); ++J)
        for (Eigen::Index I = 0; I < d.psi.rows(); ++I) {
          if (!d.mask(I, J)) continue;
          auto v = psi_derivative(d, static_cast<std::size_t>(I), static_cast<std::size_t>(J), mult);
          if (v) g = std::max(g, std::abs(*v));
        }
      row.gradBySite.push_back(g);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qlat
