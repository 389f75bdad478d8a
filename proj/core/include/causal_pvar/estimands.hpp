#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "causal_pvar/causal_lab.hpp"

namespace causal_pvar {

struct EstimandSe {
  double ate = 0.0;
  double att = 0.0;
  double selection_bias = 0.0;
  double ate_at_dl = 0.0;
};

/// Sample (finite-population) estimands over all cells of a simulated panel.
/// Grid quantities are NaN where undefined (empty bins, the zero atom).
struct EstimandReport {
  std::vector<double> grid;
  bool zero_atom = false;
  /// Dummy regimes: mean po(1) - po(0) over all / treated cells.
  double ate = 0.0;
  double att = 0.0;
  double selection_bias = 0.0;
  /// Non-negative regime: mean po(d_L) - po(0) over all cells.
  double ate_at_dl = 0.0;
  /// d/dx of the all-cell mean of po(x).
  std::vector<double> acr;
  /// Mean of d po / dx at x over cells whose dose falls in the bin of x.
  std::vector<double> acrt;
  /// Binned E[Y~ | W~ = x] and its derivative.
  std::vector<double> cond_mean;
  std::vector<double> cond_mean_slope;
  /// Cells per bin.
  std::vector<std::size_t> bin_count;
  EstimandSe mc_se;
};

/// Index of the grid point nearest to a dose.
std::size_t grid_bin(const std::vector<double>& grid, bool zero_atom, double dose);

EstimandReport oracle_estimands(const PotentialOutcomePanel& pop);

/// Cov(po(1), 1{W=1}) / P(W=1) - Cov(po(0), 1{W=0}) / P(W=0) over cells.
double selection_bias(const PotentialOutcomePanel& pop);

/// Two-group, two-period contrast of means. `outcome` is unit-major over
/// the periods listed in `period_treated`.
double did_four_means(const Eigen::VectorXd& outcome, const std::vector<char>& unit_treated,
                      const std::vector<char>& period_treated);

/// Subtracts unit and period means from a unit-major balanced panel column.
Eigen::VectorXd two_way_demean(const Eigen::VectorXd& values, std::size_t n_units, std::size_t n_times);

struct ExposureEffects {
  double atte = 0.0;
  double aste = 0.0;
  std::size_t treated_cells = 0;
};

/// Means of po(1, S) - po(0, 0) and po(0, S) - po(0, 0) over treated cells.
ExposureEffects oracle_atte_aste(const PotentialOutcomePanel& pop);

}  // namespace causal_pvar
