#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qlat/grid.hpp"

namespace qlat {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kUnderflowFloor = 1e-290;

// Sampled heat kernel U(x, y, t) on the product grid, rows indexed by x and columns by y.
struct KernelField {
  GridSpec grid;
  std::size_t sites = 1;
  double t = 0.0;
  double h = 1.0;
  // Entries below noiseFloor * max U are masked; dense spectral kernels carry ~1e-15 absolute roundoff.
  double noiseFloor = 1e-8;
  Eigen::MatrixXd U;
  Eigen::MatrixXd psi;
  BoolMatrix mask;

  std::size_t dim() const { return static_cast<std::size_t>(U.rows()); }
  std::vector<int> index(std::size_t I) const;
  std::size_t flat(const std::vector<int>& idx) const;
  std::vector<double> coords(std::size_t I) const;
  bool in_window(std::size_t I) const;
};

KernelField kernel_from_operator(const LatticeOperator& op, const GridSpec& grid, std::size_t sites);

// Fills mask and psi; psi is NaN off the mask.
KernelField extract_psi(KernelField kf);

// Spectral kernel of a lattice Hamiltonian, with psi extracted.
KernelField spectral_kernel(const InteractionSpec& spec, const Box& lambda, const GridSpec& grid, double t,
                            const Budget& budget = {});
KernelField spectral_kernel(const Eigensystem& es, const GridSpec& grid, std::size_t sites, double t, double h);

double free_kernel(const std::vector<double>& x, const std::vector<double>& y, double t, double h);
double linear_psi(double x, double y, double k, double t, double h);
double mehler_kernel(double x, double y, double omega, double t, double h);
double mehler_psi(double x, double y, double omega, double t, double h);

// Normalised Gaussian G_h(x, x', y, s, t) of the Duhamel representation.
double gaussian_propagator(const std::vector<double>& x, const std::vector<double>& xp, const std::vector<double>& y,
                           double s, double t, double h);
inline double propagator_a(double s, double t) { return t / (s * (t - s)); }

struct ResidualReport {
  double sup = 0.0;
  std::size_t xIndex = 0;
  std::size_t yIndex = 0;
  std::size_t points = 0;
};

// Residual of the Cauchy problem for psi from three extractions at t - dt, t, t + dt.
ResidualReport residual_check(const KernelField& minus, const KernelField& mid, const KernelField& plus,
                              const std::function<double(const double*)>& V);

enum class NormVariables { x, xy };

struct NormOptions {
  double eps = 0.2;
  int m = 2;
  NormVariables vars = NormVariables::x;
  std::optional<SiteSet> E;
  std::optional<SiteSet> F;
  bool infinity = false;  // the sup-over-all-indices variant
  std::optional<std::size_t> ySlice;  // restrict to one column
};

// Sup over valid points of the weighted derivative norm, with sites laid out as lambdaSites.
double weighted_norms(const KernelField& kf, const SiteSet& lambdaSites, const NormOptions& opt);

// Mixed finite-difference derivative of psi at (I, J); mult has 2*sites entries (x axes then y axes).
// Returns nullopt if a stencil point is off the mask.
std::optional<double> psi_derivative(const KernelField& kf, std::size_t I, std::size_t J, const std::vector<int>& mult);

// (S_u f)(x, y) = f(x + u, y + u) - f(x, y) with u given in grid steps per site; NaN where undefined.
Eigen::MatrixXd translate_difference(const KernelField& kf, const Eigen::MatrixXd& f, const std::vector<int>& shift);
std::vector<int> shift_in_steps(const GridSpec& grid, const std::vector<double>& u);

void write_kernel_csv(const KernelField& kf, const std::string& csvPath, const std::string& jsonPath,
                      const SiteSet& lambdaSites);

}  // namespace qlat
