#include "qlat/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include "qlat/error.hpp"
#include "qlat/quadrature.hpp"

namespace qlat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int origin_or_throw(const GridSpec& g) {
  const int o = g.origin_index();
  if (o < 0) throw Error("grid must contain origin");
  return o;
}

// Position of each site of q inside the ordered site list.
std::vector<char> membership(const SiteSet& sites, const Box& q) {
  std::vector<char> in(sites.size(), 0);
  for (std::size_t k = 0; k < sites.size(); ++k) in[k] = q.contains(sites[k]) ? 1 : 0;
  return in;
}

}  // namespace

double t_q_single(const FieldFunction& f, const Box& q, const FieldConfig& x) {
  FieldConfig zero{x.sites, std::vector<double>(x.values.size(), 0.0)};
  const double f0 = f(zero);
  double acc = 0.0;
  for (const auto& [qp, m] : interior_boxes(q)) {
    const double sign = (m % 2) ? -1.0 : 1.0;
    acc += sign * (f(project_pi(qp.sites(), x)) - f0);
  }
  return acc;
}

Eigen::MatrixXd decomposition_gauge(const KernelField& kf) {
  const int o = origin_or_throw(kf.grid);
  const Eigen::Index d = kf.psi.rows();
  const std::size_t N = kf.sites;
  Eigen::MatrixXd g = Eigen::MatrixXd::Constant(d, d, kNaN);
  const std::size_t I0 = kf.flat(std::vector<int>(N, o));
  for (Eigen::Index J = 0; J < d; ++J) {
    auto jy = kf.index(static_cast<std::size_t>(J));
    for (Eigen::Index I = 0; I < d; ++I) {
      auto ix = kf.index(static_cast<std::size_t>(I));
      std::vector<int> p(N);
      bool ok = true;
      for (std::size_t k = 0; k < N; ++k) {
        p[k] = o + jy[k] - ix[k];
        if (p[k] < 0 || p[k] >= kf.grid.n) ok = false;
      }
      if (!ok) continue;
      const auto Jp = static_cast<Eigen::Index>(kf.flat(p));
      if (kf.mask(static_cast<Eigen::Index>(I0), Jp)) g(I, J) = kf.psi(static_cast<Eigen::Index>(I0), Jp);
    }
  }
  return g;
}

DecompositionTerm t_q_doubled(const KernelField& kf, const Box& lambda, const Box& q, bool diagonalOnly) {
  const int o = origin_or_throw(kf.grid);
  if (!lambda.contains(q)) throw Error("box " + q.str() + " is not contained in " + lambda.str());
  const SiteSet sites = lambda.sites();
  if (sites.size() != kf.sites) throw Error("index mismatch: site list does not match kernel");
  const std::size_t N = kf.sites;
  const int n = kf.grid.n;

  struct Proj {
    std::vector<char> in;
    double sign;
  };
  std::vector<Proj> projs;
  for (const auto& [qp, m] : interior_boxes(q)) projs.push_back({membership(sites, qp), (m % 2) ? -1.0 : 1.0});

  const Eigen::Index d = kf.psi.rows();
  DecompositionTerm term;
  term.Q = q;
  term.diam = q.diam();
  term.t = kf.t;
  term.values = Eigen::MatrixXd::Constant(d, d, kNaN);

  auto at = [&](const std::vector<int>& a, const std::vector<int>& b, double& out) {
    for (std::size_t k = 0; k < N; ++k)
      if (a[k] < 0 || a[k] >= n || b[k] < 0 || b[k] >= n) return false;
    const auto I = static_cast<Eigen::Index>(kf.flat(a)), J = static_cast<Eigen::Index>(kf.flat(b));
    if (!kf.mask(I, J)) return false;
    out = kf.psi(I, J);
    return true;
  };

  std::vector<int> px(N), py(N);
  for (Eigen::Index J = 0; J < d; ++J) {
    const auto jy = kf.index(static_cast<std::size_t>(J));
    const Eigen::Index i0 = diagonalOnly ? J : 0, i1 = diagonalOnly ? J + 1 : d;
    for (Eigen::Index I = i0; I < i1; ++I) {
      const auto ix = kf.index(static_cast<std::size_t>(I));
      for (std::size_t k = 0; k < N; ++k) {
        px[k] = o;
        py[k] = o + jy[k] - ix[k];
      }
      double gauge;
      if (!at(px, py, gauge)) continue;
      double acc = 0.0;
      bool ok = true;
      for (const auto& pr : projs) {
        for (std::size_t k = 0; k < N; ++k) {
          px[k] = pr.in[k] ? ix[k] : o;
          py[k] = pr.in[k] ? jy[k] : o + jy[k] - ix[k];
        }
        double v;
        if (!at(px, py, v)) {
          ok = false;
          break;
        }
        acc += pr.sign * (v - gauge);
      }
      if (!ok) continue;
      term.values(I, J) = acc;
      term.supNorm = std::max(term.supNorm, std::abs(acc));
      ++term.validPoints;
    }
  }
  return term;
}

std::vector<DecompositionTerm> decompose(const KernelField& kf, const Box& lambda, int maxDiam, bool diagonalOnly) {
  std::vector<DecompositionTerm> terms;
  for (const auto& q : enumerate_boxes(lambda, maxDiam)) terms.push_back(t_q_doubled(kf, lambda, q, diagonalOnly));
  return terms;
}

double segment_average(const SitePotentialSpec& a, double x, double y) {
  const auto& q = gauss_legendre01(64);
  double s = 0.0;
  for (Eigen::Index k = 0; k < q.x.size(); ++k) s += q.w(k) * a.value(y + q.x(k) * (x - y));
  return s;
}

DecayProfile decay_profile(const std::vector<DecompositionTerm>& terms, double eps) {
  if (!(eps > 0 && eps < 1)) throw Error("decay parameter must lie in (0,1)");
  DecayProfile p;
  int maxDiam = -1;
  for (const auto& t : terms) maxDiam = std::max(maxDiam, t.diam);
  for (int r = 0; r <= maxDiam; ++r) {
    DecayRow row;
    row.diam = r;
    double tval = 0.0;
    int dim = 1;
    for (const auto& t : terms) {
      if (t.diam != r) continue;
      ++row.boxes;
      row.supNorm = std::max(row.supNorm, t.supNorm);
      tval = t.t;
      dim = t.Q.dim();
    }
    if (row.boxes == 0) continue;
    row.normalized = tval > 0 ? row.supNorm / (tval * std::pow(eps, r) * std::pow(1.0 + r, 2.0 * dim)) : 0.0;
    p.rows.push_back(row);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  const DecayRow* prev = nullptr;
  for (const auto& row : p.rows) {
    if (row.diam < 1) continue;
    if (prev && row.supNorm > prev->supNorm) p.violation = true;
    prev = &row;
    if (row.supNorm <= 0) continue;
    const double ly = std::log(row.supNorm);
    sx += row.diam;
    sy += ly;
    sxx += row.diam * row.diam;
    sxy += row.diam * ly;
    ++cnt;
  }
  if (cnt >= 2) {
    p.slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    if (p.slope >= 0) p.violation = true;
  }
  return p;
}

void write_decay_csv(const DecayProfile& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << "diam,supnorm,normalized,boxesCounted\n";
  char buf[128];
  for (const auto& r : p.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%zu\n", r.diam, r.supNorm, r.normalized, r.boxes);
    out << buf;
  }
}

SplittingExperiment::SplittingExperiment(const InteractionSpec& spec, const Box& lambda, const SiteSet& e,
                                         const GridSpec& grid, const Budget& budget)
    : spec_(spec), grid_(grid), sites_(lambda.sites()) {
  for (const auto& s : e)
    if (!lambda.contains(s)) throw Error("E must be a subset of Lambda");
  SiteSet rest;
  for (std::size_t k = 0; k < sites_.size(); ++k) {
    if (std::binary_search(e.begin(), e.end(), sites_[k])) {
      inE_.push_back(k);
    } else {
      inRest_.push_back(k);
      rest.push_back(sites_[k]);
    }
  }
  full_ = eigensystem(build_hamiltonian(spec, lambda, grid, budget));
  if (!rest.empty()) {
    PotentialEvaluator ev(spec, rest);
    auto H = build_hamiltonian(rest.size(), grid, spec.h, [&](const double* x) { return ev.value(x); }, budget);
    if (!H.is_dense()) throw BudgetError("splitting check requires dense", H.dim);
    rest_ = eigensystem(H);
  }
}

SplittingResult SplittingExperiment::check(double t) const {
  const std::size_t N = sites_.size();
  KernelField big = spectral_kernel(full_, grid_, N, t, spec_.h);
  std::optional<KernelField> small;
  if (!inRest_.empty()) small = spectral_kernel(rest_, grid_, inRest_.size(), t, spec_.h);

  SplittingResult r;
  r.t = t;
  r.scale = static_cast<double>(inE_.size()) * (t + spec_.h * spec_.h * t * t);
  Eigen::MatrixXd seg(grid_.n, grid_.n);
  for (int j = 0; j < grid_.n; ++j)
    for (int i = 0; i < grid_.n; ++i) seg(i, j) = t * segment_average(spec_.site, grid_.x(i), grid_.x(j));
  const Eigen::Index d = big.psi.rows();
  std::vector<int> a(inRest_.size()), b(inRest_.size());
  for (Eigen::Index J = 0; J < d; ++J) {
    const auto jy = big.index(static_cast<std::size_t>(J));
    for (Eigen::Index I = 0; I < d; ++I) {
      if (!big.mask(I, J)) continue;
      const auto ix = big.index(static_cast<std::size_t>(I));
      double val = big.psi(I, J);
      for (auto k : inE_) val -= seg(ix[k], jy[k]);
      if (small) {
        for (std::size_t k = 0; k < inRest_.size(); ++k) {
          a[k] = ix[inRest_[k]];
          b[k] = jy[inRest_[k]];
        }
        const auto Is = static_cast<Eigen::Index>(small->flat(a)), Js = static_cast<Eigen::Index>(small->flat(b));
        if (!small->mask(Is, Js)) continue;
        val -= small->psi(Is, Js);
      }
      ++r.points;
      r.defect = std::max(r.defect, std::abs(val));
    }
  }
  if (r.points == 0) throw Error("splitting check found no valid points");
  return r;
}

SplittingResult splitting_check(const InteractionSpec& spec, const Box& lambda, const SiteSet& e, const GridSpec& grid,
                                double t) {
  return SplittingExperiment(spec, lambda, e, grid).check(t);
}

}  // namespace qlat
