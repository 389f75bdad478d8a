#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "causal_pvar/estimands.hpp"

namespace causal_pvar {

/// Dose weights. The Gaussian profile fills q/theta/cdf; the non-negative
/// profile fills q1 on [d_L, d_U] and the scalar q0.
struct WeightProfile {
  std::vector<double> grid;
  std::vector<double> q;
  std::vector<double> theta;
  std::vector<double> cdf;
  std::vector<double> q1;
  double q0 = 0.0;
  double d_lower = 0.0;
  double d_upper = 0.0;
  /// Exact integral of q (Gaussian) or q1 (non-negative) over the support.
  double mass = 0.0;
  /// P(W = 0) = 0: the profile is purely continuous and q0 = 0.
  bool no_zero_mass = false;
};

/// Weights for a mean-zero Gaussian dose with standard deviation sigma.
WeightProfile gaussian_weights(double sigma, const std::vector<double>& grid);

/// Point mass at zero plus a uniform positive part on [d_lower, d_upper].
struct NonNegLaw {
  double zero_prob = 0.5;
  double d_lower = 1.0;
  double d_upper = 2.0;
};

/// Closed-form weights. An empty grid becomes `points` equally spaced doses
/// on [d_L, d_U].
WeightProfile nonneg_weights(const NonNegLaw& law, std::vector<double> grid = {},
                             std::size_t points = 101);
/// Empirical weights with d_L and d_U the smallest and largest positive values.
WeightProfile nonneg_weights(std::span<const double> sample, std::vector<double> grid = {},
                             std::size_t points = 101);

double trapezoid(const std::vector<double>& grid, const std::vector<double>& values);

enum class WeightedMode {
  GaussianAcr,
  GaussianAcrt,
  GaussianConditional,
  NonNegAcrtAte,
  NonNegConditional,
};

/// Gaussian modes: integral of q against ACR, ACRT or the conditional-mean
/// slope. Non-negative modes: integral of q1 against ACRT (or the slope) plus
/// q0 times ATE(d_L) / d_L (or the conditional-mean jump over d_L).
double weighted_estimand(const WeightProfile& profile, const EstimandReport& report, WeightedMode mode);

/// Integral of q (or q1) against arbitrary values on the profile grid.
double weighted_integral(const WeightProfile& profile, const std::vector<double>& values);

}  // namespace causal_pvar
