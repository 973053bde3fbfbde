#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qlat/kernel.hpp"

namespace qlat {

// Bounded operator supported on a site set, acting on grid^{|E|}.
struct Observable {
  enum class Repr { multiplication, dense };

  SiteSet support;
  Repr repr = Repr::multiplication;
  int n = 0;
  Eigen::VectorXd values;  // multiplication
  Eigen::MatrixXd matrix;  // dense
  double opNorm = 0.0;

  // f receives the |E| coordinates of a grid point.
  static Observable multiplication(SiteSet support, const GridSpec& grid, const std::function<double(const double*)>& f);
  static Observable multiplication(SiteSet support, int n, Eigen::VectorXd values);
  static Observable dense(SiteSet support, int n, Eigen::MatrixXd matrix);

  std::size_t local_dim() const;
  Eigen::MatrixXd as_matrix() const;
};

// Product of two observables with disjoint supports.
Observable disjoint_product(const Observable& a, const Observable& b);

// Index of a full-lattice grid point restricted to the support.
std::vector<std::size_t> support_indices(const SiteSet& lambda, const SiteSet& support, int n);

// Thermal state exp(-tH)/Z, either as a full matrix or only its diagonal.
class GibbsState {
 public:
  static GibbsState dense(const LatticeOperator& H, const SiteSet& lambda, double t);
  static GibbsState probed(const LatticeOperator& H, const SiteSet& lambda, double t, const ProbingParams& pp = {});
  // Picks dense when the dimension fits the dense budget, probing otherwise.
  static GibbsState automatic(const LatticeOperator& H, const SiteSet& lambda, double t, const ProbingParams& pp = {});

  bool full() const { return heat_.size() > 0; }
  double t() const { return t_; }
  double log_z() const { return logZ_; }
  double mean_energy() const { return meanEnergy_; }
  const SiteSet& sites() const { return sites_; }
  double alias_bound() const { return aliasBound_; }

  double mean(const Observable& a) const;
  double covariance(const Observable& a, const Observable& b) const;

  // Shifted heat matrix exp(-t(H - e0)) and its diagonal.
  const Eigen::MatrixXd& heat() const { return heat_; }
  const Eigen::VectorXd& heat_diagonal() const { return diag_; }
  double trace() const { return trace_; }

 private:
  void check_support(const Observable& a) const;

  SiteSet sites_;
  int n_ = 0;
  double t_ = 0.0;
  double logZ_ = 0.0;
  double trace_ = 0.0;
  double meanEnergy_ = 0.0;
  double aliasBound_ = 0.0;
  Eigen::MatrixXd heat_;
  Eigen::VectorXd diag_;
};

double gibbs_mean(const LatticeOperator& H, const SiteSet& lambda, const Observable& a, double t);
double covariance(const LatticeOperator& H, const SiteSet& lambda, const Observable& a, const Observable& b, double t);

enum class EnergyMethod { dense, stochastic, probing };

// X = d/dt ln Z = -Tr(H exp(-tH)) / Z.
TraceEstimate mean_energy(const LatticeOperator& H, double t, EnergyMethod method = EnergyMethod::dense,
                          const HutchinsonParams& hp = {}, const ProbingParams& pp = {});

struct DecayRowCov {
  int distance = 0;
  double cov = 0.0;
};

struct DecayFit {
  std::vector<DecayRowCov> rows;
  double fittedDelta = 0.0;
  double r2 = 0.0;
  bool monotone = false;
  std::string status;  // "ok", "zero-class" or "signal underflow"
  std::vector<double> empiricalN;  // |Cov| / (t delta^r)
};

inline constexpr double kCovarianceFloor = 1e-14;

DecayFit fit_decay(std::vector<DecayRowCov> rows, double t);

struct DecaySweepOptions {
  std::function<double(double)> a = [](double x) { return std::tanh(x); };
  std::function<double(double)> b = [](double x) { return std::tanh(x); };
  Budget budget{};
  ProbingParams probing{};
};

// |Cov(a(x_0), b(x_r))| for r = 1..chainLength-1 on the chain [0, chainLength-1].
DecayFit decay_sweep(const InteractionSpec& spec, int chainLength, double t, const GridSpec& grid,
                     const DecaySweepOptions& opt = {});

struct ThermoRow {
  int n = 0;
  std::size_t sites = 0;
  std::size_t dim = 0;
  double meanA = 0.0;
  double energyPerSite = 0.0;
  double splitDefect = 0.0;  // |X_Lambda - X_Lambda1 - X_Lambda2|
  std::string method;
  std::string status = "ok";
};

struct ThermoSweepOptions {
  std::function<double(double)> a = [](double x) { return std::cos(x); };
  Budget budget{};
  ProbingParams probing{};
};

// Sweep over Lambda_n = [-n, n] in d = 1; the split uses [-n, 0] and [1, n].
std::vector<ThermoRow> thermo_sweep(const InteractionSpec& spec, const std::vector<int>& nRange, double t,
                                    const GridSpec& grid, const ThermoSweepOptions& opt = {});

struct ThetaRow {
  double theta = 0.0;
  double supDtheta = 0.0;
  std::vector<double> gradBySite;  // sup |grad_lambda d_theta psi| per site of Lambda
  std::vector<int> distBySite;     // distance to the separating hyperplane
};

// psi for V - theta * (coupling between l1 and l2), with d/dtheta by central differences.
std::vector<ThetaRow> theta_interpolation(const InteractionSpec& spec, const Box& l1, const Box& l2, double t,
                                          const GridSpec& grid, const std::vector<double>& thetas,
                                          double dtheta = 1e-2);

// psi of the interpolated potential at one theta.
KernelField theta_kernel(const InteractionSpec& spec, const Box& l1, const Box& l2, double t, const GridSpec& grid,
                         double theta);

}  // namespace qlat
