#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "qlat/decomposition.hpp"
#include "qlat/thermo.hpp"

namespace qlat {

// (1 / 2 Z~) Tr(exp(-t H~)(A' - A'')(B' - B'')) with H~ = H' + H'', using literal embeddings of A and B.
double doubled_covariance(const LatticeOperator& H, const SiteSet& lambda, const Observable& a, const Observable& b,
                          double t);

struct SymmetryElement {
  std::vector<char> swap;  // per position in Lambda
  int sign = 1;
};

std::vector<SymmetryElement> group_elements(const SiteSet& lambda, const SiteSet& e1, const SiteSet& e2);

enum class Connectivity { C, NC };

// C iff the boxes of gamma contain a chain of intersecting boxes from e1 to e2.
Connectivity classify(const std::vector<Box>& gamma, const SiteSet& e1, const SiteSet& e2);

// A point X = (x', x'', y', y'') of the doubled space, as flat indices of the single-system grid.
struct DoubledPoint {
  std::size_t x1 = 0, x2 = 0, y1 = 0, y2 = 0;
};

// Factors of the Mayer expansion. Doubled fields are never stored: T_Q psi~ splits over the two copies.
class MayerFactors {
 public:
  MayerFactors(KernelField kf, const Box& lambda);

  const Box& lambda() const { return lambda_; }
  const KernelField& kernel() const { return kf_; }
  const std::vector<Box>& boxes() const { return boxes_; }  // Box(Lambda), multi-point boxes
  double m_q(std::size_t q) const { return mq_[q]; }
  // sup of f_Q over every doubled point whose copies are both valid.
  double sup_f(std::size_t q) const { return supF_[q]; }
  double total_m() const { return totalM_; }

  bool valid(const DoubledPoint& X) const;
  double u_doubled(const DoubledPoint& X) const;
  double psi_doubled(const DoubledPoint& X) const;
  double f_box(std::size_t q, const DoubledPoint& X) const;
  double f_site(std::size_t position, const DoubledPoint& X) const;
  double phi0(const DoubledPoint& X) const;
  // gamma holds indices into boxes().
  double k_gamma(const std::vector<std::size_t>& gamma, const DoubledPoint& X) const;

  // Image of X under the copy swap on the positions marked in swap.
  DoubledPoint act(const std::vector<char>& swap, const DoubledPoint& X) const;

  // Random valid points; diagonal points have x' = y' and x'' = y''.
  std::vector<DoubledPoint> sample(std::size_t count, std::uint64_t seed, bool diagonal) const;

 private:
  bool single_valid(std::size_t I, std::size_t J) const;
  double log_u0(std::size_t I, std::size_t J) const;

  KernelField kf_;
  Box lambda_;
  std::vector<Box> boxes_;
  std::vector<DecompositionTerm> boxTerms_;
  std::vector<DecompositionTerm> siteTerms_;
  Eigen::MatrixXd gauge_;
  std::vector<double> mq_;
  std::vector<double> supF_;
  double totalM_ = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> validPairs_;
};

MayerFactors mayer_factors(const KernelField& kf, const Box& lambda);

inline constexpr std::size_t kMaxMayerBoxes = 12;
inline constexpr std::size_t kMaxGroupSize = std::size_t{1} << 16;

struct ReconstructionReport {
  double maxRelError = 0.0;
  std::size_t points = 0;
  std::size_t subsets = 0;
};

// Sum of K_Gamma over all subsets of Box(Lambda), against U~ = U(x', y') U(x'', y'').
ReconstructionReport mayer_reconstruct(const MayerFactors& f, const std::vector<DoubledPoint>& points);

enum class WPath { direct, gammaWise };

// Signed group average of U~; the gamma-wise path sums averaged K_Gamma instead.
// Points whose group orbit leaves the valid set give NaN and usable[k] = 0.
std::vector<double> averaged_kernel_w(const MayerFactors& f, const SiteSet& e1, const SiteSet& e2,
                                      const std::vector<DoubledPoint>& points, WPath path,
                                      std::vector<char>* usable = nullptr);

struct CancellationReport {
  double signedSup = 0.0;
  double scale = 0.0;  // sup of K_Gamma over the orbit points
  std::size_t points = 0;
};

// sup over points of |sum_sigma sgn(sigma) K_Gamma(sigma X)|; gamma must not connect e1 to e2.
CancellationReport nc_cancellation_check(const MayerFactors& f, const std::vector<std::size_t>& gamma, const SiteSet& e1,
                                 const SiteSet& e2, const std::vector<DoubledPoint>& points);

// prod_j T eps^diam(Q_j) (1 + diam(Q_j))^{2d}
double polymer_weight(const std::vector<Box>& polymer, double eps, double T);

// sup_{R > 0} (1 + R)^{6d} s^R for s in (0, 1).
double phi_sup(double s, int d);

// Largest T with sqrt(eps delta)(1 + T Phi(eps / sqrt(eps delta))) <= delta.
double admissible_t1(double eps, double delta, int d);

struct PolymerBoundRow {
  int distance = 0;
  double lhsSum = 0.0;
  double rhsBound = 0.0;
  double margin = 0.0;  // rhsBound - lhsSum
  std::size_t polymers = 0;
};

struct PolymerBoundOptions {
  int maxBoxes = 4;
  int maxDiam = 3;
  bool enforceAdmissible = true;
};

PolymerBoundRow polymer_bound_check(const SiteSet& e1, const SiteSet& e2, double eps, double delta, double T,
                                    const PolymerBoundOptions& opt = {});
void write_polymer_csv(const std::vector<PolymerBoundRow>& rows, const std::string& path);

struct FQFit {
  std::vector<int> diam;
  std::vector<double> supF;
  std::vector<double> ratio;  // supF / (eps^diam <Q>^{2d})
  double a = 0.0;             // a e^a = max ratio
};

FQFit fit_fq_envelope(const MayerFactors& f, double eps);

}  // namespace qlat
