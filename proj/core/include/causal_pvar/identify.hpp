#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "causal_pvar/panel.hpp"

namespace causal_pvar {

/// Lower-triangular O with O * O' = Sigma.
struct CholeskyFactor {
  Eigen::MatrixXd lower;
};

/// Recursive factorization of a residual covariance. Eigenvalues down to
/// -1e-8 are treated as rounding noise and clamped; anything more negative
/// raises NotPSD.
CholeskyFactor cholesky_lower(const Eigen::MatrixXd& sigma);

/// Contemporaneous impact of a unit innovation in variable `k` on variable
/// `j` (0-based, k < j): o_jk / o_kk.
double impact_gamma(const CholeskyFactor& chol, std::size_t k, std::size_t j);

enum class ShockNormalization { UnitShock, OneStdDev };

struct ImpulseResponse {
  std::size_t shock_index = 0;
  std::size_t horizon = 0;
  /// m x (H + 1); column h is the response at horizon h.
  Eigen::MatrixXd responses;
  ShockNormalization normalization = ShockNormalization::UnitShock;
};

ImpulseResponse irf(const PVARFit& fit, const CholeskyFactor& chol, std::size_t k, std::size_t horizon,
                    ShockNormalization normalization = ShockNormalization::UnitShock);

/// Propagates an arbitrary impact vector through the fitted dynamics.
ImpulseResponse irf_from_impact(const PVARFit& fit, const Eigen::VectorXd& impact, std::size_t horizon);
ImpulseResponse irf_from_impact(const std::vector<Eigen::MatrixXd>& phi, const Eigen::VectorXd& impact,
                                std::size_t horizon);

struct BootstrapBands {
  double level = 0.9;
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
  std::size_t n_reps = 0;
  std::uint64_t seed = 0;
  std::size_t failed_reps = 0;
};

struct BootstrapIrf {
  ImpulseResponse point;
  BootstrapBands bands;
};

struct BootstrapOptions {
  std::size_t reps = 1000;
  double level = 0.9;
  std::uint64_t seed = 0;
  ShockNormalization normalization = ShockNormalization::UnitShock;
  unsigned threads = 1;
};

/// Residual bootstrap: residual vectors are drawn i.i.d. over cells, panels
/// are regenerated recursively from the fitted intercepts and slopes with the
/// first observed periods of every unit held fixed, and the model is refit.
/// Bands are percentile quantiles at (1 -/+ level) / 2.
BootstrapIrf bootstrap_irf(const PanelDataset& panel, const PVARSpec& spec, std::size_t k,
                           std::size_t horizon, const BootstrapOptions& options);

/// Regenerates a panel from a fit and a matrix of innovations laid out like
/// fit.residuals. Periods before fit.first_period are copied from `panel`.
PanelDataset regenerate_panel(const PanelDataset& panel, const PVARFit& fit,
                              const Eigen::MatrixXd& innovations);

/// Type-7 (linear interpolation) sample quantile; `values` is sorted in place.
double sample_quantile(std::vector<double>& values, double prob);

}  // namespace causal_pvar
