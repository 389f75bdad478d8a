#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "causal_pvar/panel.hpp"

namespace causal_pvar {

struct LagCriteriaRow {
  std::size_t lag_order = 0;
  double log_det_sigma = 0.0;
  double mbic_like = 0.0;
  double maic_like = 0.0;
  double mqic_like = 0.0;
};

struct LagSelectionTable {
  std::vector<LagCriteriaRow> rows;
  std::size_t chosen_mbic = 0;
  std::size_t chosen_maic = 0;
  std::size_t chosen_mqic = 0;
  /// Common-sample size N * (T - pmax) shared by every row.
  std::size_t effective_obs = 0;
};

/// Log-det information criteria for p = 1..pmax, every order fitted on the
/// common sample t > pmax. Ties go to the smaller p.
LagSelectionTable lag_criteria(const PanelDataset& panel, std::size_t max_lag,
                               const PVARSpec& base_spec = {});

struct ResidualAutocorrelation {
  std::size_t max_lag = 0;
  /// corr[s - 1](j, l) = corr(e_{j,t}, e_{l,t-s}) pooled over units.
  std::vector<Eigen::MatrixXd> corr;
  /// Two-sided band with family-wise level `family_alpha` across all
  /// m * m * max_lag entries (Bonferroni); z / sqrt(effective_obs).
  double bound = 0.0;
  double family_alpha = 0.05;
  bool violated = false;
  double max_abs_corr = 0.0;
};

ResidualAutocorrelation residual_autocorr(const PVARFit& fit, std::size_t max_lag,
                                          double family_alpha = 0.05);

struct StationarityReport {
  double spectral_radius = 0.0;
  bool stationary = false;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Spectral radius of the companion matrix by power iteration. A two-term
/// Krylov recurrence fitted on consecutive iterates resolves dominant complex
/// pairs; if the iteration does not settle, the Gelfand bound
/// ||C^k||^(1/k) is reported and `converged` is false.
StationarityReport stationarity(const PVARFit& fit, double tolerance = 1e-10,
                                std::size_t max_iterations = 10000);
StationarityReport stationarity(const Eigen::MatrixXd& companion_matrix, double tolerance = 1e-10,
                                std::size_t max_iterations = 10000);

struct PolicyProbe {
  std::size_t n = 0;
  bool is_binary = false;
  double share_zero = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  /// n * skew^2 / 6 + n * exkurt^2 / 24; chi-square(2) under normality.
  double normality_stat = 0.0;
};

PolicyProbe policy_regime_probe(std::span<const double> series);

struct DiagnosticsReport {
  ResidualAutocorrelation autocorr;
  StationarityReport stationarity;
  std::vector<PolicyProbe> policy_probes;
};

/// Runs the three diagnostics on a fit; one probe per policy residual series.
DiagnosticsReport diagnose(const PVARFit& fit, std::size_t n_policies, std::size_t max_lag);

}  // namespace causal_pvar
