#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "qlat/kernel.hpp"

namespace qlat {

using FieldFunction = std::function<double(const FieldConfig&)>;

// Single-variable T_Q f at x.
double t_q_single(const FieldFunction& f, const Box& q, const FieldConfig& x);

// Doubled-variable T_Q psi on the kernel grid; NaN wherever a projected point is off the mask.
struct DecompositionTerm {
  Box Q;
  Eigen::MatrixXd values;
  double supNorm = 0.0;
  int diam = 0;
  double t = 0.0;
  std::size_t validPoints = 0;
};

DecompositionTerm t_q_doubled(const KernelField& kf, const Box& lambda, const Box& q, bool diagonalOnly = false);

// All terms for boxes of diameter <= maxDiam inside lambda.
std::vector<DecompositionTerm> decompose(const KernelField& kf, const Box& lambda, int maxDiam,
                                         bool diagonalOnly = false);

// psi(0, y - x), the additive gauge of the decomposition; NaN where undefined.
Eigen::MatrixXd decomposition_gauge(const KernelField& kf);

// Mean of A on the segment [y, x].
double segment_average(const SitePotentialSpec& a, double x, double y);

struct DecayRow {
  int diam = 0;
  double supNorm = 0.0;
  double normalized = 0.0;
  std::size_t boxes = 0;
};

struct DecayProfile {
  std::vector<DecayRow> rows;
  double slope = 0.0;  // least-squares slope of ln supNorm against diam over diam >= 1
  bool violation = false;
};

DecayProfile decay_profile(const std::vector<DecompositionTerm>& terms, double eps);
void write_decay_csv(const DecayProfile& p, const std::string& path);

struct SplittingResult {
  double defect = 0.0;
  double scale = 0.0;  // |E| (t + h^2 t^2)
  double t = 0.0;
  std::size_t points = 0;
};

// Compares psi_Lambda with t sum_E A~ + psi_{Lambda \ E}, reusing eigensystems across t.
class SplittingExperiment {
 public:
  SplittingExperiment(const InteractionSpec& spec, const Box& lambda, const SiteSet& e, const GridSpec& grid,
                      const Budget& budget = {});
  SplittingResult check(double t) const;

 private:
  InteractionSpec spec_;
  GridSpec grid_;
  SiteSet sites_;
  std::vector<std::size_t> inE_;    // positions of E inside sites_
  std::vector<std::size_t> inRest_;  // positions of Lambda \ E
  Eigensystem full_;
  Eigensystem rest_;
};

SplittingResult splitting_check(const InteractionSpec& spec, const Box& lambda, const SiteSet& e, const GridSpec& grid,
                                double t);

}  // namespace qlat
