#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

namespace causal_pvar {

enum class ExposureMode { TreatedNeighborShare, BinaryAnyNeighbor };

std::string_view to_string(ExposureMode mode);
ExposureMode parse_exposure_mode(std::string_view text);

struct ExposureMap {
  /// N x N symmetric 0/1 matrix with a zero diagonal.
  Eigen::MatrixXd adjacency;
  /// N x T matrix of S_it.
  Eigen::MatrixXd s_values;
  ExposureMode mode = ExposureMode::TreatedNeighborShare;
};

/// Undirected ring over n units (i adjacent to i - 1 and i + 1).
Eigen::MatrixXd ring_adjacency(std::size_t n_units);

/// `treatment` is N x T; a cell counts as treated when its value is nonzero.
/// Units without neighbours get S = 0.
ExposureMap build_exposure(const Eigen::MatrixXd& adjacency, const Eigen::MatrixXd& treatment,
                           ExposureMode mode);

struct SpilloverFit {
  double delta = 0.0;
  double rho = 0.0;
  double se_delta = 0.0;
  double se_rho = 0.0;
  std::size_t n_reps = 0;
  std::uint64_t seed = 0;
  /// S carried no variation; rho is reported as 0 and delta is the
  /// univariate slope.
  bool exposure_degenerate = false;
  /// At least one input had a mean beyond 1e-8 and was recentred.
  bool recentred = false;
};

struct SpilloverOptions {
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// Least squares of y on (w, s) without intercept; standard errors from an
/// i.i.d. cell bootstrap. reps == 0 skips the bootstrap and leaves the
/// standard errors at 0.
SpilloverFit spillover_regression(const Eigen::VectorXd& w, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& s, const SpilloverOptions& options);

}  // namespace causal_pvar
