#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "causal_pvar/panel.hpp"
#include "causal_pvar/spillover.hpp"

namespace causal_pvar {

enum class Regime {
  HomogeneousDummy,
  GaussianContinuous,
  NonNegativeContinuous,
  HeterogeneousDummy,
  SpilloverDummy,
};

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view text);

/// Structural contemporaneous effect g of the policy innovation on the
/// outcome innovation.
struct ImpactFunction {
  enum class Kind { Linear, Quadratic, Step };
  Kind kind = Kind::Linear;
  /// Linear: a * x. Quadratic: a * x + b * x^2. Step: a * 1{x >= b}.
  double a = 1.0;
  double b = 0.0;

  double operator()(double x) const;
  double derivative(double x) const;
};

enum class TreatSchedule {
  /// Every cell of an eligible unit is treated independently with treat_prob.
  Sparse,
  /// Eligible units are treated in a common random subset of periods.
  Block,
};

struct ScenarioConfig {
  Regime regime = Regime::HomogeneousDummy;
  std::size_t n_units = 200;
  std::size_t n_times = 200;
  std::size_t burn_in = 50;
  /// Slope matrices per lag for (W, Y).
  std::vector<Eigen::MatrixXd> phi{(Eigen::MatrixXd(2, 2) << 0.2, 0.0, 0.3, 0.5).finished()};
  double mu_scale = 1.0;
  ImpactFunction impact;
  double outcome_noise_sd = 1.0;

  double treat_prob = 0.5;
  /// Share of units eligible for treatment (HeterogeneousDummy).
  double treat_frac = 0.3;
  TreatSchedule schedule = TreatSchedule::Sparse;
  double treated_period_frac = 0.5;

  double policy_sd = 1.0;
  double zero_prob = 0.5;
  double d_lower = 1.0;
  double d_upper = 2.0;

  /// Heterogeneous gains correlated with the realized assignment.
  double selection_gain = 0.0;
  /// Level shift of untreated outcomes of eligible units (anticipation).
  double anticipation_shift = 0.0;

  double spillover_rho = 0.5;
  ExposureMode exposure_mode = ExposureMode::TreatedNeighborShare;
  /// Empty means a ring over the units.
  Eigen::MatrixXd adjacency;

  std::size_t grid_points = 101;
  std::uint64_t seed = 0;
};

/// Throws BadConfig when parameters contradict the regime.
void validate_config(const ScenarioConfig& config);

/// Applies one `key=value` setting. Unknown keys raise BadConfig.
void apply_setting(ScenarioConfig& config, std::string_view key, std::string_view value);

/// Reads `key=value` lines; blank lines and lines starting with '#' are skipped.
ScenarioConfig parse_scenario_config(std::istream& in);

/// Ground truth of a simulated panel. Cells are unit-major over all T periods.
struct PotentialOutcomePanel {
  ScenarioConfig truth;
  std::size_t n_units = 0;
  std::size_t n_times = 0;
  /// Dose grid; {0, 1} for dummy regimes, {0} followed by the positive
  /// support for the non-negative regime.
  std::vector<double> grid;
  bool zero_atom = false;
  /// Realized policy innovation W~ per cell.
  Eigen::VectorXd assignment;
  /// Realized outcome innovation Y~ per cell.
  Eigen::VectorXd outcome;
  /// Potential outcome innovations, cells x grid.
  Eigen::MatrixXd po_grid;
  /// Exposure S per cell (SpilloverDummy only).
  Eigen::VectorXd exposure;
  /// Columns po(0, 0), po(0, S), po(1, 0), po(1, S) at the realized exposure.
  Eigen::MatrixXd po_exposure;
  std::vector<char> unit_in_treated_group;
  std::vector<char> period_in_treated_group;
  /// Realized positive support (non-negative regime).
  double d_lower = 0.0;
  double d_upper = 0.0;

  /// Per-cell ingredients: po(x) = g(x) + selection_gain * gain_score * x + base.
  Eigen::VectorXd base;
  Eigen::VectorXd gain_score;

  std::size_t cells() const { return n_units * n_times; }
  /// Potential outcome at an arbitrary dose (at the realized exposure).
  double potential(std::size_t cell, double dose) const;
};

struct Simulation {
  PanelDataset panel;
  PotentialOutcomePanel truth;
};

Simulation simulate_scenario(const ScenarioConfig& config);

/// Plain Gaussian PVAR draw, used for diagnostics and benchmarks.
struct VarDgp {
  std::vector<Eigen::MatrixXd> phi;
  Eigen::MatrixXd sigma;
  std::size_t n_units = 50;
  std::size_t n_times = 200;
  std::size_t n_policies = 1;
  std::size_t burn_in = 50;
  double mu_scale = 1.0;
  std::uint64_t seed = 0;
};

PanelDataset simulate_pvar(const VarDgp& dgp);

}  // namespace causal_pvar
