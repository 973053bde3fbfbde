#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "qlat/interaction.hpp"
#include "qlat/krylov.hpp"

namespace qlat {

enum class Stencil { central3, sineDvr };

const char* stencil_name(Stencil s);
Stencil parse_stencil(const std::string& s);

struct GridSpec {
  double L = 6.0;
  int n = 32;
  int interiorMargin = 1;
  double windowFraction = 0.6;
  Stencil stencil = Stencil::sineDvr;

  void validate() const;
  double dx() const { return 2.0 * L / (n - 1); }
  double x(int i) const { return -L + i * dx(); }
  // Index of the grid point at 0, or -1 when n is even.
  int origin_index() const { return (n % 2) ? n / 2 : -1; }
  bool in_window(int i) const;
};

struct Budget {
  std::size_t dense = 5000;
  std::size_t sparse = 1000000;
};

std::size_t grid_dimension(int n, std::size_t sites);

// One-dimensional kinetic matrix -(h^2/2) d^2/dx^2 with Dirichlet truncation.
Eigen::MatrixXd kinetic_matrix(const GridSpec& grid, double h);

class LatticeOperator {
 public:
  enum class Kind { dense, kroneckerSum, heatAction };

  Kind kind = Kind::dense;
  std::size_t dim = 0;
  std::size_t sites = 0;
  int n = 0;
  double h = 1.0;
  double t = 0.0;

  Eigen::MatrixXd matrix;  // dense
  Eigen::MatrixXd kinetic;  // kroneckerSum: per-axis matrix
  bool tridiagonal = false;
  Eigen::VectorXd potential;  // kroneckerSum: diagonal over the full grid

  // Optional separable reference used by diagonal probing: per-site potential on the 1-D grid
  // and the range of the non-separable remainder.
  std::optional<Eigen::VectorXd> sitePotential;
  double couplingMin = 0.0;
  double couplingMax = 0.0;

  std::shared_ptr<const LatticeOperator> base;  // heatAction

  bool is_dense() const { return kind == Kind::dense; }
  void apply(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) const;
  BlockApply as_block_apply() const;
  Eigen::MatrixXd to_dense() const;
  SpectralInterval spectral_bounds() const;
};

using GridPotential = std::function<double(const double* x)>;

LatticeOperator build_hamiltonian(const InteractionSpec& spec, const Box& lambda, const GridSpec& grid,
                                  const Budget& budget = {}, bool forceSparse = false);
LatticeOperator build_hamiltonian(std::size_t sites, const GridSpec& grid, double h, const GridPotential& V,
                                  const Budget& budget = {}, bool forceSparse = false);

struct Eigensystem {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

Eigensystem eigensystem(const LatticeOperator& H);
Eigen::MatrixXd heat_matrix(const Eigensystem& es, double t);

LatticeOperator heat_operator(const LatticeOperator& H, double t);

struct TraceEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t probes = 0;
};

struct HutchinsonParams {
  int kprobes = 32;
  int lanczosSteps = 40;
  std::uint64_t seed = 12345;
};

struct ProbingParams {
  double tol = 1e-13;
  int blockSize = 4;
  std::uint64_t seed = 2024;
  std::size_t maxColors = 200000;
};

struct ProbingResult {
  Eigen::VectorXd heatDiag;    // diagonal of exp(-tH)
  Eigen::VectorXd energyDiag;  // diagonal of H exp(-tH)
  std::size_t colors = 0;
  std::vector<long long> weights;
  double aliasBound = 0.0;
  int chebyshevDegree = 0;
};

// Diagonals of exp(-tH) and H exp(-tH) from coloured indicator probes.
ProbingResult probe_diagonals(const LatticeOperator& H, double t, const ProbingParams& params = {});

enum class TraceMethod { dense, hutchinson, probing };

TraceEstimate partition_function(const LatticeOperator& H, double t, TraceMethod method = TraceMethod::dense,
                                 const HutchinsonParams& hp = {}, const ProbingParams& pp = {});

// Stochastic Lanczos quadrature samples of v^T exp(-tH) v and v^T H exp(-tH) v.
struct SlqSamples {
  std::vector<double> z;
  std::vector<double> e;
};
SlqSamples slq_samples(const LatticeOperator& H, double t, const HutchinsonParams& hp);

}  // namespace qlat
