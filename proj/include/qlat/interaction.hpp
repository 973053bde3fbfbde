#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qlat/lattice.hpp"

namespace qlat {

struct SitePotentialSpec {
  enum class Kind { zero, constant, linear, pseudoLinearWell, harmonic };
  Kind kind = Kind::zero;
  // c, k, a or omega depending on kind.
  double param = 0.0;

  static SitePotentialSpec zero() { return {Kind::zero, 0.0}; }
  static SitePotentialSpec constant(double c) { return {Kind::constant, c}; }
  static SitePotentialSpec linear(double k) { return {Kind::linear, k}; }
  static SitePotentialSpec pseudo_linear_well(double a);
  static SitePotentialSpec harmonic(double omega) { return {Kind::harmonic, omega}; }

  bool oracle_only() const { return kind == Kind::harmonic; }
  double value(double x) const;
  // Derivative of order k in {1, 2, 3}.
  double derivative(double x, int k) const;
  // sup over R of |A^(k)|, k in {1, 2, 3}; infinite for the harmonic well.
  double sup_derivative(int k) const;
};

struct PairCouplingSpec {
  enum class Kind { zero, cosineDiff, boundedProduct };
  Kind kind = Kind::zero;
  double J = 0.0;
  double eps = 0.2;

  static PairCouplingSpec zero(double eps = 0.2) { return {Kind::zero, 0.0, eps}; }
  static PairCouplingSpec cosine_diff(double J, double eps) { return {Kind::cosineDiff, J, eps}; }
  static PairCouplingSpec bounded_product(double J, double eps) {
    return {Kind::boundedProduct, J, eps};
  }

  bool vanishes() const { return kind == Kind::zero || J == 0.0; }
  // g and its partial derivatives d^a/dx^a d^b/dy^b for a + b <= 3.
  double g(double x, double y, int a = 0, int b = 0) const;
  // B_{lambda mu}(x, y) = J eps^r g(x, y) at lattice distance r.
  double coupling(int r, double x, double y) const;
  double weight(int r) const;
};

struct InteractionSpec {
  SitePotentialSpec site;
  PairCouplingSpec pair;
  int d = 1;
  double h = 1.0;

  void validate() const;
};

struct HypothesisConstants {
  double M1 = 0.0;
  double M2 = 0.0;
  double T0 = std::numeric_limits<double>::infinity();
};

double potential_value(const InteractionSpec& spec, const SiteSet& lambda, const std::vector<double>& x);
double potential_value(const InteractionSpec& spec, const Box& lambda, const FieldConfig& x);

// Precomputed site list and pair weights for repeated evaluation of V and its gradient.
class PotentialEvaluator {
 public:
  PotentialEvaluator(const InteractionSpec& spec, SiteSet sites);

  std::size_t size() const { return sites_.size(); }
  const SiteSet& sites() const { return sites_; }
  double value(const double* x) const;
  double grad(const double* x, std::size_t lambda) const;
  double pair_value(const double* x) const;

 private:
  InteractionSpec spec_;
  SiteSet sites_;
  std::vector<double> w_;  // w_[i*N + j] = J eps^{|i-j|}, zero on the diagonal
};

std::size_t shell_count(int d, int r);

// Sum over r >= 1 of shell_count(d, r) eps^r, evaluated to double precision.
double lattice_series(int d, double eps);

HypothesisConstants hypothesis_constants(const InteractionSpec& spec, const Box& lambda);

// Bound on sup_lambda sum_mu ||d_lambda^alpha d_mu^beta B|| / eps^{|lambda-mu|} over a finite box.
double coupling_constant(const InteractionSpec& spec, const Box& lambda, int alpha, int beta);

// V_inter(x) = sum over lambda in L1, mu in L2 of B(x_lambda, x_mu), x indexed by sites of L1 u L2.
using PotentialFunction = std::function<double(const FieldConfig&)>;
PotentialFunction interaction_split(const InteractionSpec& spec, const Box& l1, const Box& l2);

}  // namespace qlat
