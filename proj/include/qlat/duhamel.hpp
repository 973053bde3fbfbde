#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qlat/grid.hpp"

namespace qlat {

struct SolverParams {
  int nodes = 64;          // trapezoid intervals per time step
  double tol = 1e-10;      // sup-norm change between sweeps
  int maxSweeps = 50;
  int hermite = 20;        // Gauss-Hermite nodes per axis for the Gaussian convolution
  int interp = 6;          // Lagrange interpolation points
  double t0Factor = 1e-3;  // start time as a fraction of T0 / h
  int maxHalvings = 6;
};

struct DuhamelResult {
  Eigen::VectorXd psi;             // psi(., y, t) on the product grid
  std::vector<Eigen::VectorXd> u;  // gradient components per site
  std::vector<int> sweeps;         // fixed-point sweeps per time step
  std::vector<double> residuals;   // last sweep change per time step
  std::vector<double> stepEnds;
  double t0 = 0.0;
};

// psi(x, y, t) for a fixed grid point y (one index per site) by the Duhamel fixed point, |Lambda| <= 2.
DuhamelResult duhamel_solve(const InteractionSpec& spec, const Box& lambda, const GridSpec& grid,
                            const std::vector<int>& yIndex, double t, const SolverParams& params = {});

// Per-axis matrix of f -> integral of G(x, x', y, s, t) f(x') dx' on the grid.
Eigen::MatrixXd gaussian_smoothing_matrix(const GridSpec& grid, double y, double s, double t, double h, int hermite,
                                          int interp);

}  // namespace qlat
