#include "causal_pvar/spillover.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "causal_pvar/error.hpp"
#include "causal_pvar/random.hpp"

namespace causal_pvar {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kDriftGuard = 1e-8;
constexpr double kMinReciprocalCondition = 1e-10;

struct TwoRegressorFit {
  double delta = 0.0;
  double rho = 0.0;
};

// Solves the 2 x 2 normal equations; rho = 0 when s carries no signal.
TwoRegressorFit solve_two(const VectorXd& w, const VectorXd& y, const VectorXd& s, bool s_degenerate) {
  const double ww = w.squaredNorm();
  if (!(ww > 0.0)) throw Error(ErrorCode::CollinearRegressors, "policy regressor has no variation");
  if (s_degenerate) return {w.dot(y) / ww, 0.0};
  const double ss = s.squaredNorm();
  const double ws = w.dot(s);
  const double det = ww * ss - ws * ws;
  if (!(ss > 0.0) || det <= kMinReciprocalCondition * ww * ss) {
    throw Error(ErrorCode::CollinearRegressors, "policy and exposure regressors are collinear");
  }
  const double wy = w.dot(y);
  const double sy = s.dot(y);
  return {(ss * wy - ws * sy) / det, (ww * sy - ws * wy) / det};
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string_view to_string(ExposureMode mode) {
  return mode == ExposureMode::TreatedNeighborShare ? "treated_neighbor_share" : "binary_any_neighbor";
}

ExposureMode parse_exposure_mode(std::string_view text) {
  if (text == "treated_neighbor_share" || text == "share") return ExposureMode::TreatedNeighborShare;
  if (text == "binary_any_neighbor" || text == "binary") return ExposureMode::BinaryAnyNeighbor;
  throw Error(ErrorCode::InvalidSpec, "unknown exposure mode '" + std::string(text) + "'");
}

MatrixXd ring_adjacency(std::size_t n_units) {
  const auto n = static_cast<Index>(n_units);
  MatrixXd a = MatrixXd::Zero(n, n);
  if (n < 2) return a;
  for (Index i = 0; i < n; ++i) {
    const Index next = (i + 1) % n;
    if (next != i) {
      a(i, next) = 1.0;
      a(next, i) = 1.0;
    }
  }
  return a;
}

ExposureMap build_exposure(const MatrixXd& adjacency, const MatrixXd& treatment, ExposureMode mode) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n || treatment.rows() != n) {
    throw Error(ErrorCode::InvalidSpec, "adjacency must be N x N and treatment N x T");
  }
  for (Index i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) {
      throw Error(ErrorCode::SelfLoop, "unit " + std::to_string(i) + " is adjacent to itself");
    }
    for (Index j = i + 1; j < n; ++j) {
      if (adjacency(i, j) != adjacency(j, i)) {
        throw Error(ErrorCode::AsymmetricAdjacency,
                    "adjacency differs between units " + std::to_string(i) + " and " + std::to_string(j));
      }
      if (adjacency(i, j) != 0.0 && adjacency(i, j) != 1.0) {
        throw Error(ErrorCode::InvalidSpec, "adjacency entries must be 0 or 1");
      }
    }
  }
  const MatrixXd treated = (treatment.array() != 0.0).cast<double>();
  const MatrixXd counts = adjacency * treated;
  const VectorXd degree = adjacency.rowwise().sum();

  ExposureMap map;
  map.adjacency = adjacency;
  map.mode = mode;
  map.s_values = MatrixXd::Zero(n, treatment.cols());
  for (Index i = 0; i < n; ++i) {
    if (degree(i) == 0.0) continue;
    for (Index t = 0; t < treatment.cols(); ++t) {
      map.s_values(i, t) = mode == ExposureMode::TreatedNeighborShare ? counts(i, t) / degree(i)
                                                                      : (counts(i, t) > 0.0 ? 1.0 : 0.0);
    }
  }
  return map;
}

SpilloverFit spillover_regression(const VectorXd& w_in, const VectorXd& y_in, const VectorXd& s_in,
                                  const SpilloverOptions& options) {
  const Index n = w_in.size();
  if (y_in.size() != n || s_in.size() != n || n < 3) {
    throw Error(ErrorCode::InvalidSpec, "spillover series must be aligned and hold at least 3 cells");
  }
  if (!w_in.allFinite() || !y_in.allFinite() || !s_in.allFinite()) {
    throw Error(ErrorCode::NonFinite, "spillover series contain non-finite values");
  }
  SpilloverFit out;
  out.seed = options.seed;
  VectorXd w = w_in;
  VectorXd y = y_in;
  VectorXd s = s_in;
  for (VectorXd* v : {&w, &y, &s}) {
    const double mean = v->mean();
    if (std::abs(mean) > kDriftGuard) {
      v->array() -= mean;
      out.recentred = true;
    }
  }
  out.exposure_degenerate = s.cwiseAbs().maxCoeff() == 0.0;
  const TwoRegressorFit point = solve_two(w, y, s, out.exposure_degenerate);
  out.delta = point.delta;
  out.rho = point.rho;

  if (options.reps == 0) return out;
  std::vector<double> deltas(options.reps);
  std::vector<double> rhos(options.reps);
  std::vector<char> failed(options.reps, 0);
  parallel_for(options.reps, options.threads, [&](std::size_t b) {
    Rng rng = make_rng(options.seed, b);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    VectorXd wb(n);
    VectorXd yb(n);
    VectorXd sb(n);
    for (Index k = 0; k < n; ++k) {
      const Index c = pick(rng);
      wb(k) = w(c);
      yb(k) = y(c);
      sb(k) = s(c);
    }
    try {
      const TwoRegressorFit fit = solve_two(wb, yb, sb, out.exposure_degenerate);
      deltas[b] = fit.delta;
      rhos[b] = fit.rho;
    } catch (const Error&) {
      failed[b] = 1;
    }
  });
  std::vector<double> kept_delta;
  std::vector<double> kept_rho;
  for (std::size_t b = 0; b < options.reps; ++b) {
    if (failed[b]) continue;
    kept_delta.push_back(deltas[b]);
    kept_rho.push_back(rhos[b]);
  }
  if (kept_delta.size() * 20 < options.reps * 19) {
    throw Error(ErrorCode::BootstrapUnstable, "more than 5% of spillover bootstrap replications failed");
  }
  out.n_reps = options.reps;
  out.se_delta = sample_sd(kept_delta);
  out.se_rho = sample_sd(kept_rho);
  return out;
}

}  // namespace causal_pvar
