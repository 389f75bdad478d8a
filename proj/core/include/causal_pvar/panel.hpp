#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace causal_pvar {

/// Balanced (unit, time) panel. Rows of `values` are cells ordered
/// unit-major (row = unit * n_times + time); columns are the K policy
/// series followed by the J outcome series.
struct PanelDataset {
  std::size_t n_units = 0;
  std::size_t n_times = 0;
  std::size_t n_policies = 0;
  std::size_t n_outcomes = 0;
  Eigen::MatrixXd values;
  std::vector<std::string> variable_names;
  /// Optional 0/1 controls, same row layout as `values`; zero columns if absent.
  Eigen::MatrixXd exogenous_dummies;
  /// External labels used for I/O; default to 0..N-1 and 0..T-1.
  std::vector<long> unit_ids;
  std::vector<long> time_ids;

  std::size_t n_vars() const { return n_policies + n_outcomes; }
  std::size_t row(std::size_t unit, std::size_t time) const { return unit * n_times + time; }
  double at(std::size_t unit, std::size_t time, std::size_t var) const {
    return values(static_cast<Eigen::Index>(row(unit, time)), static_cast<Eigen::Index>(var));
  }
};

/// One long-format observation as read from a file.
struct PanelRecord {
  long unit = 0;
  long time = 0;
  std::vector<double> values;
};

/// Builds a dense panel from long-format records in any order. Rows are
/// canonicalized by (unit, time); a missing cell raises UnbalancedPanel
/// naming the first offending (unit, time).
PanelDataset assemble_panel(std::vector<PanelRecord> records,
                            std::vector<std::string> variable_names,
                            std::size_t n_policies);

/// Checks shape, finiteness and the policies-first metadata.
PanelDataset validate_panel(PanelDataset raw);

struct PVARSpec {
  std::size_t lag_order = 1;
  bool include_unit_effects = true;
  /// Indices into PanelDataset::exogenous_dummies.
  std::vector<std::size_t> dummy_columns;
};

struct PVARFit {
  /// phi[l] is the m x m slope matrix on lag l + 1.
  std::vector<Eigen::MatrixXd> phi;
  /// Unit intercepts c_i (N x m), so that x_it = c_i + sum_l phi_l x_{i,t-l} + ...
  Eigen::MatrixXd intercept;
  /// Unit means mu_i = (I - sum_l phi_l)^{-1} c_i; NaN when that matrix is singular.
  Eigen::MatrixXd mu;
  /// m x d loadings on the selected exogenous dummies.
  Eigen::MatrixXd dummy_coef;
  /// Innovations, rows unit-major over t = first_period .. T-1.
  Eigen::MatrixXd residuals;
  Eigen::MatrixXd sigma;
  PVARSpec spec;
  std::size_t n_units = 0;
  std::size_t n_times = 0;
  std::size_t first_period = 0;
  std::size_t effective_obs = 0;

  std::size_t n_vars() const { return static_cast<std::size_t>(sigma.rows()); }
  std::size_t periods_per_unit() const { return n_times - first_period; }
  std::size_t residual_row(std::size_t unit, std::size_t time) const {
    return unit * periods_per_unit() + (time - first_period);
  }
};

/// Removes unit means from every series; with dummy columns, the dummies are
/// partialled out jointly with the unit means.
PanelDataset within_demean(const PanelDataset& panel, const PVARSpec& spec);

/// Fixed-effects (within) least squares of x_it on its own p lags, pooled
/// over units. `first_period` (default p) moves the estimation sample start
/// forward so that different lag orders can share a common sample.
PVARFit fit_pvar(const PanelDataset& panel, const PVARSpec& spec,
                 std::optional<std::size_t> first_period = std::nullopt);

struct CompanionMatrix {
  Eigen::MatrixXd matrix;
  std::size_t m = 0;
  std::size_t p = 0;
};

CompanionMatrix companion(const PVARFit& fit);
CompanionMatrix companion(const std::vector<Eigen::MatrixXd>& phi);

}  // namespace causal_pvar
