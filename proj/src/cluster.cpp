#include "qlat/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "qlat/error.hpp"

namespace qlat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> positions_in(const SiteSet& lambda, const SiteSet& e) {
  std::vector<std::size_t> pos;
  for (const auto& s : e) {
    auto it = std::lower_bound(lambda.begin(), lambda.end(), s);
    if (it == lambda.end() || *it != s) throw Error("E1 and E2 must be disjoint subsets of Lambda");
    pos.push_back(static_cast<std::size_t>(it - lambda.begin()));
  }
  return pos;
}

bool overlap(const SiteSet& a, const SiteSet& b) {
  for (const auto& s : a)
    if (std::binary_search(b.begin(), b.end(), s)) return true;
  return false;
}

SiteSet complement(const SiteSet& lambda, const SiteSet& e) {
  SiteSet out;
  for (const auto& s : lambda)
    if (!std::binary_search(e.begin(), e.end(), s)) out.push_back(s);
  return out;
}

Eigen::MatrixXd embed(const Observable& a, const SiteSet& lambda, int n) {
  const auto loc = support_indices(lambda, a.support, n);
  const SiteSet rest = complement(lambda, a.support);
  const std::vector<std::size_t> other =
      rest.empty() ? std::vector<std::size_t>(loc.size(), 0) : support_indices(lambda, rest, n);
  const Eigen::MatrixXd A = a.as_matrix();
  const auto dim = static_cast<Eigen::Index>(loc.size());
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index J = 0; J < dim; ++J)
    for (Eigen::Index I = 0; I < dim; ++I) {
      const auto i = static_cast<std::size_t>(I), j = static_cast<std::size_t>(J);
      if (other[i] == other[j]) E(I, J) = A(static_cast<Eigen::Index>(loc[i]), static_cast<Eigen::Index>(loc[j]));
    }
  return E;
}

// Tr(P Q) without forming the product.
double trace_product(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) { return P.cwiseProduct(Q.transpose()).sum(); }

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t k) {
  while (parent[k] != k) k = parent[k] = parent[parent[k]];
  return k;
}

std::vector<std::vector<std::size_t>> all_subsets(std::size_t count) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << count); ++mask) {
    std::vector<std::size_t> g;
    for (std::size_t q = 0; q < count; ++q)
      if (mask & (std::size_t{1} << q)) g.push_back(q);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

double doubled_covariance(const LatticeOperator& H, const SiteSet& lambda, const Observable& a, const Observable& b,
                          double t) {
  if (overlap(a.support, b.support)) throw Error("overlapping supports");
  if (!H.is_dense()) throw BudgetError("doubled covariance requires a dense operator", H.dim);
  GibbsState g = GibbsState::dense(H, lambda, t);
  const Eigen::MatrixXd& rho = g.heat();
  const Eigen::MatrixXd EA = embed(a, lambda, H.n), EB = embed(b, lambda, H.n);
  const double z = rho.trace();
  const double ta = trace_product(rho, EA), tb = trace_product(rho, EB);
  const double tab = trace_product(rho * EA, EB);
  // Tr over the doubled space factorises: Tr((r x r)(X' Y'')) = Tr(r X) Tr(r Y).
  const double doubled = tab * z - ta * tb - tb * ta + z * tab;
  return doubled / (2.0 * z * z);
}

std::vector<SymmetryElement> group_elements(const SiteSet& lambda, const SiteSet& e1, const SiteSet& e2) {
  if (overlap(e1, e2)) throw Error("E1 and E2 must be disjoint subsets of Lambda");
  const auto p1 = positions_in(lambda, e1), p2 = positions_in(lambda, e2);
  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < lambda.size(); ++k)
    if (std::find(p1.begin(), p1.end(), k) == p1.end() && std::find(p2.begin(), p2.end(), k) == p2.end())
      free.push_back(k);
  const std::size_t bits = 2 + free.size();
  if ((std::size_t{1} << bits) > kMaxGroupSize) throw BudgetError("symmetry group exceeds the group budget", bits);
  std::vector<SymmetryElement> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << bits); ++mask) {
    SymmetryElement s;
    s.swap.assign(lambda.size(), 0);
    const bool s1 = mask & 1u, s2 = mask & 2u;
    for (auto p : p1) s.swap[p] = s1;
    for (auto p : p2) s.swap[p] = s2;
    for (std::size_t k = 0; k < free.size(); ++k) s.swap[free[k]] = (mask >> (2 + k)) & 1u;
    s.sign = (s1 ? -1 : 1) * (s2 ? -1 : 1);
    out.push_back(std::move(s));
  }
  return out;
}

Connectivity classify(const std::vector<Box>& gamma, const SiteSet& e1, const SiteSet& e2) {
  std::vector<std::size_t> parent(gamma.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < gamma.size(); ++i)
    for (std::size_t j = i + 1; j < gamma.size(); ++j)
      if (gamma[i].intersects(gamma[j])) parent[find_root(parent, i)] = find_root(parent, j);
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (!gamma[i].meets(e1)) continue;
    for (std::size_t j = 0; j < gamma.size(); ++j)
      if (gamma[j].meets(e2) && find_root(parent, i) == find_root(parent, j)) return Connectivity::C;
  }
  return Connectivity::NC;
}

MayerFactors::MayerFactors(KernelField kf, const Box& lambda) : kf_(std::move(kf)), lambda_(lambda) {
  const SiteSet sites = lambda_.sites();
  if (sites.size() != kf_.sites) throw Error("index mismatch: site list does not match kernel");
  for (auto& q : enumerate_boxes(lambda_, std::numeric_limits<int>::max() / 2))
    if (q.diam() >= 1) boxes_.push_back(std::move(q));
  for (const auto& q : boxes_) boxTerms_.push_back(t_q_doubled(kf_, lambda_, q));
  for (const auto& s : sites) siteTerms_.push_back(t_q_doubled(kf_, lambda_, Box::point(s)));
  gauge_ = decomposition_gauge(kf_);

  const auto d = kf_.psi.rows();
  for (Eigen::Index J = 0; J < d; ++J)
    for (Eigen::Index I = 0; I < d; ++I)
      if (single_valid(static_cast<std::size_t>(I), static_cast<std::size_t>(J)))
        validPairs_.emplace_back(static_cast<std::size_t>(I), static_cast<std::size_t>(J));
  if (validPairs_.empty()) throw Error("insufficient valid support");

  for (const auto& term : boxTerms_) {
    double hi = -std::numeric_limits<double>::infinity(), lo = -hi;
    for (const auto& [I, J] : validPairs_) {
      const double v = term.values(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J));
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    mq_.push_back(2.0 * hi);
    supF_.push_back(std::expm1(2.0 * (hi - lo)));
    totalM_ += 2.0 * hi;
  }
}

bool MayerFactors::single_valid(std::size_t I, std::size_t J) const {
  const auto i = static_cast<Eigen::Index>(I), j = static_cast<Eigen::Index>(J);
  if (!kf_.mask(i, j) || !std::isfinite(gauge_(i, j))) return false;
  for (const auto& t : boxTerms_)
    if (!std::isfinite(t.values(i, j))) return false;
  for (const auto& t : siteTerms_)
    if (!std::isfinite(t.values(i, j))) return false;
  return true;
}

double MayerFactors::log_u0(std::size_t I, std::size_t J) const {
  const auto x = kf_.coords(I), y = kf_.coords(J);
  double r2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - y[k]) * (x[k] - y[k]);
  const double s = kf_.t * kf_.h * kf_.h;
  return -r2 / (2.0 * s) - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * s);
}

bool MayerFactors::valid(const DoubledPoint& X) const { return single_valid(X.x1, X.y1) && single_valid(X.x2, X.y2); }

double MayerFactors::u_doubled(const DoubledPoint& X) const {
  return kf_.U(static_cast<Eigen::Index>(X.x1), static_cast<Eigen::Index>(X.y1)) *
         kf_.U(static_cast<Eigen::Index>(X.x2), static_cast<Eigen::Index>(X.y2));
}

double MayerFactors::psi_doubled(const DoubledPoint& X) const {
  return kf_.psi(static_cast<Eigen::Index>(X.x1), static_cast<Eigen::Index>(X.y1)) +
         kf_.psi(static_cast<Eigen::Index>(X.x2), static_cast<Eigen::Index>(X.y2));
}

namespace {

double pair_sum(const Eigen::MatrixXd& m, const DoubledPoint& X) {
  return m(static_cast<Eigen::Index>(X.x1), static_cast<Eigen::Index>(X.y1)) +
         m(static_cast<Eigen::Index>(X.x2), static_cast<Eigen::Index>(X.y2));
}

}  // namespace

double MayerFactors::f_box(std::size_t q, const DoubledPoint& X) const {
  return std::expm1(mq_[q] - pair_sum(boxTerms_[q].values, X));
}

double MayerFactors::f_site(std::size_t position, const DoubledPoint& X) const {
  return std::exp(-pair_sum(siteTerms_[position].values, X));
}

double MayerFactors::phi0(const DoubledPoint& X) const {
  return std::exp(log_u0(X.x1, X.y1) + log_u0(X.x2, X.y2) - pair_sum(gauge_, X) - totalM_);
}

double MayerFactors::k_gamma(const std::vector<std::size_t>& gamma, const DoubledPoint& X) const {
  double logk = log_u0(X.x1, X.y1) + log_u0(X.x2, X.y2) - pair_sum(gauge_, X) - totalM_;
  for (const auto& t : siteTerms_) logk -= pair_sum(t.values, X);
  double prod = 1.0;
  for (auto q : gamma) prod *= f_box(q, X);
  return prod * std::exp(logk);
}

DoubledPoint MayerFactors::act(const std::vector<char>& swap, const DoubledPoint& X) const {
  auto a = kf_.index(X.x1), b = kf_.index(X.x2), c = kf_.index(X.y1), e = kf_.index(X.y2);
  for (std::size_t k = 0; k < swap.size(); ++k)
    if (swap[k]) {
      std::swap(a[k], b[k]);
      std::swap(c[k], e[k]);
    }
  return {kf_.flat(a), kf_.flat(b), kf_.flat(c), kf_.flat(e)};
}

std::vector<DoubledPoint> MayerFactors::sample(std::size_t count, std::uint64_t seed, bool diagonal) const {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (const auto& p : validPairs_)
    if ((p.first == p.second) == diagonal) pool.push_back(p);
  if (pool.empty()) throw Error("insufficient valid support");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<DoubledPoint> out;
  for (std::size_t k = 0; k < count; ++k) {
    const auto p = pool[pick(rng)], q = pool[pick(rng)];
    out.push_back({p.first, q.first, p.second, q.second});
  }
  return out;
}

MayerFactors mayer_factors(const KernelField& kf, const Box& lambda) { return MayerFactors(kf, lambda); }

ReconstructionReport mayer_reconstruct(const MayerFactors& f, const std::vector<DoubledPoint>& points) {
  const std::size_t B = f.boxes().size();
  if (B > kMaxMayerBoxes) throw BudgetError("subset budget exceeded: Box(Lambda) has more than 12 boxes", B);
  const auto subsets = all_subsets(B);
  ReconstructionReport r;
  r.subsets = subsets.size();
  for (const auto& X : points) {
    if (!f.valid(X)) continue;
    double s = 0.0;
    for (const auto& g : subsets) s += f.k_gamma(g, X);
    const double u = f.u_doubled(X);
    r.maxRelError = std::max(r.maxRelError, std::abs(s - u) / u);
    ++r.points;
  }
  return r;
}

std::vector<double> averaged_kernel_w(const MayerFactors& f, const SiteSet& e1, const SiteSet& e2,
                                      const std::vector<DoubledPoint>& points, WPath path, std::vector<char>* usable) {
  const auto group = group_elements(f.lambda().sites(), e1, e2);
  std::vector<std::vector<std::size_t>> subsets;
  if (path == WPath::gammaWise) {
    if (f.boxes().size() > kMaxMayerBoxes)
      throw BudgetError("subset budget exceeded: Box(Lambda) has more than 12 boxes", f.boxes().size());
    subsets = all_subsets(f.boxes().size());
  }
  const double inv = 1.0 / static_cast<double>(group.size());
  std::vector<double> out(points.size(), kNaN);
  if (usable) usable->assign(points.size(), 0);
  for (std::size_t k = 0; k < points.size(); ++k) {
    std::vector<DoubledPoint> orbit;
    bool ok = true;
    for (const auto& s : group) {
      orbit.push_back(f.act(s.swap, points[k]));
      if (!f.valid(orbit.back())) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    double w = 0.0;
    if (path == WPath::direct) {
      for (std::size_t g = 0; g < group.size(); ++g) w += group[g].sign * f.u_doubled(orbit[g]);
    } else {
      for (const auto& gamma : subsets) {
        double part = 0.0;
        for (std::size_t g = 0; g < group.size(); ++g) part += group[g].sign * f.k_gamma(gamma, orbit[g]);
        w += part;
      }
    }
    out[k] = w * inv;
    if (usable) (*usable)[k] = 1;
  }
  return out;
}

CancellationReport nc_cancellation_check(const MayerFactors& f, const std::vector<std::size_t>& gamma, const SiteSet& e1,
                                 const SiteSet& e2, const std::vector<DoubledPoint>& points) {
  std::vector<Box> boxes;
  for (auto q : gamma) boxes.push_back(f.boxes().at(q));
  if (classify(boxes, e1, e2) == Connectivity::C) throw Error("cancellation check applies to NC only");
  const auto group = group_elements(f.lambda().sites(), e1, e2);
  CancellationReport r;
  for (const auto& X : points) {
    double s = 0.0, scale = 0.0;
    bool ok = true;
    for (const auto& g : group) {
      const DoubledPoint Y = f.act(g.swap, X);
      if (!f.valid(Y)) {
        ok = false;
        break;
      }
      const double k = f.k_gamma(gamma, Y);
      s += g.sign * k;
      scale = std::max(scale, k);
    }
    if (!ok) continue;
    r.signedSup = std::max(r.signedSup, std::abs(s));
    r.scale = std::max(r.scale, scale);
    ++r.points;
  }
  return r;
}

double polymer_weight(const std::vector<Box>& polymer, double eps, double T) {
  if (polymer.empty()) throw Error("empty polymer");
  double w = 1.0;
  for (std::size_t j = 0; j < polymer.size(); ++j) {
    const Box& q = polymer[j];
    if (q.diam() < 1) throw Error("polymer boxes must not be single points");
    if (j > 0 && !q.intersects(polymer[j - 1])) throw Error("consecutive polymer boxes must intersect");
    w *= T * std::pow(eps, q.diam()) * std::pow(1.0 + q.diam(), 2.0 * q.dim());
  }
  return w;
}

double phi_sup(double s, int d) {
  if (!(s > 0 && s < 1)) throw Error("phi requires s in (0,1)");
  const double r = -6.0 * d / std::log(s) - 1.0;
  if (r <= 0) return 1.0;
  return std::pow(1.0 + r, 6.0 * d) * std::pow(s, r);
}

double admissible_t1(double eps, double delta, int d) {
  if (!(eps > 0 && eps < delta && delta < 1)) throw Error("decay parameters must satisfy 0 < eps < delta < 1");
  const double gamma = std::sqrt(eps * delta);
  return (delta / gamma - 1.0) / phi_sup(eps / gamma, d);
}

PolymerBoundRow polymer_bound_check(const SiteSet& e1, const SiteSet& e2, double eps, double delta, double T,
                                    const PolymerBoundOptions& opt) {
  if (e1.empty() || e2.empty()) throw Error("E1 and E2 must be nonempty");
  if (overlap(e1, e2)) throw Error("overlapping supports E1 and E2");
  const int d = e1.front().dim();
  const double t1 = admissible_t1(eps, delta, d);
  if (opt.enforceAdmissible && !(T < t1)) throw Error("outside admissible temperature range");
  // Every polymer with at most maxBoxes boxes stays within this margin of E1.
  const int margin = opt.maxBoxes * opt.maxDiam;
  std::vector<int> lo(static_cast<std::size_t>(d), std::numeric_limits<int>::max()), hi(lo.size(), std::numeric_limits<int>::min());
  for (const SiteSet* e : {&e1, &e2})
    for (const auto& s : *e)
      for (std::size_t a = 0; a < lo.size(); ++a) {
        lo[a] = std::min(lo[a], s.c[a] - margin);
        hi[a] = std::max(hi[a], s.c[a] + margin);
      }
  PolymerBoundRow row;
  row.distance = linf_dist(e1, e2);
  for (const auto& p : enumerate_polymers(e1, e2, Box(lo, hi), opt.maxBoxes, opt.maxDiam)) {
    row.lhsSum += polymer_weight(p.boxes, eps, T);
    ++row.polymers;
  }
  row.rhsBound = T * static_cast<double>(std::min(e1.size(), e2.size())) * phi_sup(std::sqrt(eps / delta), d) *
                 std::pow(delta, row.distance) / (1.0 - delta);
  row.margin = row.rhsBound - row.lhsSum;
  return row;
}

void write_polymer_csv(const std::vector<PolymerBoundRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << "distance,lhsSum,rhsBound,margin\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.distance, r.lhsSum, r.rhsBound, r.margin);
    out << buf;
  }
}

FQFit fit_fq_envelope(const MayerFactors& f, double eps) {
  if (!(eps > 0 && eps < 1)) throw Error("decay parameter must lie in (0,1)");
  FQFit fit;
  int maxDiam = 0;
  for (const auto& q : f.boxes()) maxDiam = std::max(maxDiam, q.diam());
  const int dim = f.lambda().dim();
  double best = 0.0;
  for (int r = 1; r <= maxDiam; ++r) {
    double s = 0.0;
    for (std::size_t q = 0; q < f.boxes().size(); ++q)
      if (f.boxes()[q].diam() == r) s = std::max(s, f.sup_f(q));
    const double ratio = s / (std::pow(eps, r) * std::pow(1.0 + r, 2.0 * dim));
    fit.diam.push_back(r);
    fit.supF.push_back(s);
    fit.ratio.push_back(ratio);
    best = std::max(best, ratio);
  }
  // Newton on a e^a = best, monotone for a >= 0.
  double a = best;
  for (int it = 0; it < 100 && best > 0; ++it) {
    const double g = a * std::exp(a) - best;
    const double step = g / ((1.0 + a) * std::exp(a));
    a -= step;
    if (std::abs(step) < 1e-15 * std::max(1.0, a)) break;
  }
  fit.a = best > 0 ? a : 0.0;
  return fit;
}

}  // namespace qlat
