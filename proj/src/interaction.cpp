#include "qlat/interaction.hpp"

#include <cmath>
#include <numbers>

#include "qlat/error.hpp"

namespace qlat {

SitePotentialSpec SitePotentialSpec::pseudo_linear_well(double a) {
  if (!(a > 0)) throw Error("pseudoLinearWell requires a > 0");
  return {Kind::pseudoLinearWell, a};
}

double SitePotentialSpec::value(double x) const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::constant: return param;
    case Kind::linear: return param * x;
    case Kind::pseudoLinearWell: return param * std::sqrt(1.0 + x * x);
    case Kind::harmonic: return 0.5 * param * param * x * x;
  }
  return 0.0;
}

double SitePotentialSpec::derivative(double x, int k) const {
  if (k < 1 || k > 3) throw Error("site potential derivative order must be 1..3");
  switch (kind) {
    case Kind::zero:
    case Kind::constant: return 0.0;
    case Kind::linear: return k == 1 ? param : 0.0;
    case Kind::pseudoLinearWell: {
      const double s = 1.0 + x * x;
      if (k == 1) return param * x / std::sqrt(s);
      if (k == 2) return param / (s * std::sqrt(s));
      return -3.0 * param * x / (s * s * std::sqrt(s));
    }
    case Kind::harmonic: {
      const double w2 = param * param;
      if (k == 1) return w2 * x;
      if (k == 2) return w2;
      return 0.0;
    }
  }
  return 0.0;
}

double SitePotentialSpec::sup_derivative(int k) const {
  if (k < 1 || k > 3) throw Error("site potential derivative order must be 1..3");
  switch (kind) {
    case Kind::zero:
    case Kind::constant: return 0.0;
    case Kind::linear: return k == 1 ? std::abs(param) : 0.0;
    case Kind::pseudoLinearWell:
      if (k == 3) return 1.5 * param / std::pow(1.25, 2.5);  // attained at |x| = 1/2
      return param;
    case Kind::harmonic:
      if (k == 1) return std::numeric_limits<double>::infinity();
      return k == 2 ? param * param : 0.0;
  }
  return 0.0;
}

namespace {

double cos_deriv(double u, int n) { return std::cos(u + n * std::numbers::pi / 2); }
double sin_deriv(double u, int n) { return std::sin(u + n * std::numbers::pi / 2); }

}  // namespace

double PairCouplingSpec::g(double x, double y, int a, int b) const {
  switch (kind) {
    case Kind::zero: return 0.0;
    case Kind::cosineDiff: {
      if (a == 0 && b == 0) return std::cos(x - y);
      const double v = cos_deriv(x - y, a + b);
      return (b % 2) ? -v : v;
    }
    case Kind::boundedProduct:
      if (a == 0 && b == 0) return std::sin(x) * std::sin(y);
      return sin_deriv(x, a) * sin_deriv(y, b);
  }
  return 0.0;
}

double PairCouplingSpec::weight(int r) const {
  if (vanishes() || r < 1) return 0.0;
  return J * std::pow(eps, r);
}

double PairCouplingSpec::coupling(int r, double x, double y) const {
  return weight(r) * g(x, y);
}

void InteractionSpec::validate() const {
  if (!(pair.eps > 0 && pair.eps < 1)) throw Error("decay parameter must lie in (0,1)");
  if (!(h > 0)) throw Error("h must be positive");
  if (d < 1) throw Error("lattice dimension must be at least 1");
  if (site.kind == SitePotentialSpec::Kind::pseudoLinearWell && !(site.param > 0))
    throw Error("pseudoLinearWell requires a > 0");
}

double potential_value(const InteractionSpec& spec, const SiteSet& lambda, const std::vector<double>& x) {
  if (x.size() != lambda.size()) throw Error("index mismatch: configuration size differs from lattice");
  PotentialEvaluator ev(spec, lambda);
  return ev.value(x.data());
}

double potential_value(const InteractionSpec& spec, const Box& lambda, const FieldConfig& x) {
  SiteSet s = lambda.sites();
  if (x.sites != s) throw Error("index mismatch: configuration not indexed by the box");
  return potential_value(spec, s, x.values);
}

PotentialEvaluator::PotentialEvaluator(const InteractionSpec& spec, SiteSet sites)
    : spec_(spec), sites_(std::move(sites)) {
  const std::size_t n = sites_.size();
  w_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) w_[i * n + j] = spec_.pair.weight(linf_dist(sites_[i], sites_[j]));
}

double PotentialEvaluator::pair_value(const double* x) const {
  if (spec_.pair.vanishes()) return 0.0;
  const std::size_t n = sites_.size();
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) v += 2.0 * w_[i * n + j] * spec_.pair.g(x[i], x[j]);
  return v;
}

double PotentialEvaluator::value(const double* x) const {
  double v = 0.0;
  for (std::size_t i = 0; i < sites_.size(); ++i) v += spec_.site.value(x[i]);
  return v + pair_value(x);
}

double PotentialEvaluator::grad(const double* x, std::size_t lambda) const {
  double g = spec_.site.kind == SitePotentialSpec::Kind::zero ? 0.0 : spec_.site.derivative(x[lambda], 1);
  if (spec_.pair.vanishes()) return g;
  const std::size_t n = sites_.size();
  for (std::size_t j = 0; j < n; ++j)
    if (j != lambda) g += 2.0 * w_[lambda * n + j] * spec_.pair.g(x[lambda], x[j], 1, 0);
  return g;
}

std::size_t shell_count(int d, int r) {
  if (r == 0) return 1;
  auto p = [d](long long b) {
    long long v = 1;
    for (int k = 0; k < d; ++k) v *= b;
    return v;
  };
  return static_cast<std::size_t>(p(2LL * r + 1) - p(2LL * r - 1));
}

double lattice_series(int d, double eps) {
  double s = 0.0;
  for (int r = 1; r < 100000; ++r) {
    double term = static_cast<double>(shell_count(d, r)) * std::pow(eps, r);
    s += term;
    if (term < 1e-18 * s) break;
  }
  return s;
}

HypothesisConstants hypothesis_constants(const InteractionSpec& spec, const Box& lambda) {
  spec.validate();
  if (spec.site.oracle_only()) throw Error("outside the bounded-derivative class: harmonic well is an oracle-only potential");
  HypothesisConstants c;
  const double J = spec.pair.vanishes() ? 0.0 : std::abs(spec.pair.J);
  c.M1 = spec.site.sup_derivative(1) + 2.0 * J * lattice_series(spec.d, spec.pair.eps);

  // Diagonal block: A'' plus self terms 2 B_xx; off-diagonal blocks 2 B_xy / eps^r.
  const SiteSet sites = lambda.sites();
  double m2 = 0.0;
  for (const auto& s : sites) {
    double diag = spec.site.sup_derivative(2);
    double off = 0.0;
    for (const auto& r : sites) {
      if (r == s) continue;
      const int dist = linf_dist(s, r);
      diag += 2.0 * J * std::pow(spec.pair.eps, dist);
      off += 2.0 * J;
    }
    m2 = std::max(m2, diag + off);
  }
  c.M2 = m2;
  c.T0 = m2 > 0 ? 1.0 / std::sqrt(m2) : std::numeric_limits<double>::infinity();
  return c;
}

double coupling_constant(const InteractionSpec& spec, const Box& lambda, int alpha, int beta) {
  if (alpha < 0 || beta < 0 || alpha + beta > 3) throw Error("coupling constant supports alpha + beta <= 3");
  if (spec.pair.vanishes()) return 0.0;
  const SiteSet sites = lambda.sites();
  double best = 0.0;
  for (const auto& s : sites) {
    double sum = 0.0;
    for (const auto& r : sites)
      if (r != s) sum += std::abs(spec.pair.J);  // every derivative of g is bounded by 1
    best = std::max(best, sum);
  }
  return best;
}

PotentialFunction interaction_split(const InteractionSpec& spec, const Box& l1, const Box& l2) {
  if (l1.intersects(l2)) throw Error("interaction split requires disjoint boxes");
  SiteSet s1 = l1.sites(), s2 = l2.sites();
  return [spec, s1, s2](const FieldConfig& x) {
    double v = 0.0;
    if (spec.pair.vanishes()) return v;
    for (const auto& a : s1)
      for (const auto& b : s2) v += spec.pair.coupling(linf_dist(a, b), x.at(a), x.at(b));
    return v;
  };
}

}  // namespace qlat
