#include "causal_pvar/identify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "causal_pvar/error.hpp"
#include "causal_pvar/random.hpp"

namespace causal_pvar {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

constexpr double kClampThreshold = -1e-8;
constexpr double kZeroPolicyVariance = 1e-12;

}  // namespace

CholeskyFactor cholesky_lower(const MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw Error(ErrorCode::NotPSD, "covariance must be a non-empty square matrix");
  }
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorCode::NotPSD, "covariance is not symmetric");
  }
  const MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < kClampThreshold) {
    std::ostringstream msg;
    msg << "minimum eigenvalue " << min_eig << " below " << kClampThreshold;
    throw Error(ErrorCode::NotPSD, msg.str());
  }

  const Index m = sym.rows();
  MatrixXd o = MatrixXd::Zero(m, m);
  for (Index c = 0; c < m; ++c) {
    double diag = sym(c, c) - o.row(c).head(c).squaredNorm();
    diag = std::max(diag, 0.0);
    o(c, c) = std::sqrt(diag);
    for (Index r = c + 1; r < m; ++r) {
      const double off = sym(r, c) - o.row(r).head(c).dot(o.row(c).head(c));
      o(r, c) = o(c, c) > 0.0 ? off / o(c, c) : 0.0;
    }
  }
  return CholeskyFactor{std::move(o)};
}

double impact_gamma(const CholeskyFactor& chol, std::size_t k, std::size_t j) {
  const auto m = static_cast<std::size_t>(chol.lower.rows());
  if (k >= m || j >= m || k >= j) {
    throw Error(ErrorCode::InvalidSpec, "impact_gamma needs k < j < m in the recursive ordering");
  }
  const double okk = chol.lower(idx(k), idx(k));
  if (okk < kZeroPolicyVariance) {
    throw Error(ErrorCode::ZeroPolicyVariance, "policy innovation has no variance");
  }
  return chol.lower(idx(j), idx(k)) / okk;
}

ImpulseResponse irf_from_impact(const std::vector<MatrixXd>& phi, const VectorXd& impact,
                                std::size_t horizon) {
  const Index m = impact.size();
  const std::size_t p = phi.size();
  ImpulseResponse out;
  out.horizon = horizon;
  out.responses = MatrixXd::Zero(m, idx(horizon + 1));
  out.responses.col(0) = impact;
  // Direct recursion y_h = sum_l phi_l y_{h-l}; identical to selecting the
  // first block of companion^h applied to (impact, 0, ..., 0).
  for (std::size_t h = 1; h <= horizon; ++h) {
    VectorXd next = VectorXd::Zero(m);
    for (std::size_t l = 1; l <= std::min(p, h); ++l) {
      next.noalias() += phi[l - 1] * out.responses.col(idx(h - l));
    }
    out.responses.col(idx(h)) = next;
  }
  return out;
}

ImpulseResponse irf_from_impact(const PVARFit& fit, const VectorXd& impact, std::size_t horizon) {
  if (static_cast<std::size_t>(impact.size()) != fit.n_vars()) {
    throw Error(ErrorCode::InvalidSpec, "impact vector length differs from the number of variables");
  }
  return irf_from_impact(fit.phi, impact, horizon);
}

ImpulseResponse irf(const PVARFit& fit, const CholeskyFactor& chol, std::size_t k, std::size_t horizon,
                    ShockNormalization normalization) {
  const auto m = static_cast<std::size_t>(chol.lower.rows());
  if (k >= m) throw Error(ErrorCode::InvalidSpec, "shock index out of range");
  VectorXd impact = chol.lower.col(idx(k));
  if (normalization == ShockNormalization::UnitShock) {
    const double okk = chol.lower(idx(k), idx(k));
    if (okk < kZeroPolicyVariance) {
      throw Error(ErrorCode::ZeroPolicyVariance, "shocked variable has no innovation variance");
    }
    impact /= okk;
  }
  ImpulseResponse out = irf_from_impact(fit, impact, horizon);
  out.shock_index = k;
  out.normalization = normalization;
  return out;
}

PanelDataset regenerate_panel(const PanelDataset& panel, const PVARFit& fit, const MatrixXd& innovations) {
  PanelDataset out = panel;
  const std::size_t start = fit.first_period;
  const std::size_t p = fit.phi.size();
  const auto& dummies = panel.exogenous_dummies;
  for (std::size_t i = 0; i < panel.n_units; ++i) {
    for (std::size_t t = start; t < panel.n_times; ++t) {
      VectorXd x = fit.intercept.row(idx(i)).transpose();
      for (std::size_t l = 1; l <= p; ++l) {
        x.noalias() += fit.phi[l - 1] * out.values.row(idx(out.row(i, t - l))).transpose();
      }
      for (std::size_t c = 0; c < fit.spec.dummy_columns.size(); ++c) {
        x += fit.dummy_coef.col(idx(c)) * dummies(idx(panel.row(i, t)), idx(fit.spec.dummy_columns[c]));
      }
      x += innovations.row(idx(fit.residual_row(i, t))).transpose();
      out.values.row(idx(out.row(i, t))) = x.transpose();
    }
  }
  return out;
}

double sample_quantile(std::vector<double>& values, double prob) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BootstrapIrf bootstrap_irf(const PanelDataset& panel, const PVARSpec& spec, std::size_t k,
                           std::size_t horizon, const BootstrapOptions& options) {
  if (options.reps < 100) throw Error(ErrorCode::InvalidSpec, "bootstrap needs at least 100 replications");
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw Error(ErrorCode::InvalidSpec, "band level must lie in (0, 1)");
  }
  const PVARFit fit = fit_pvar(panel, spec);
  BootstrapIrf result;
  result.point = irf(fit, cholesky_lower(fit.sigma), k, horizon, options.normalization);

  const Index m = idx(fit.n_vars());
  const Index cols = idx(horizon + 1);
  const auto cells = static_cast<std::size_t>(fit.residuals.rows());
  std::vector<MatrixXd> draws(options.reps);
  std::vector<char> ok(options.reps, 0);

  parallel_for(options.reps, options.threads, [&](std::size_t b) {
    Rng rng = make_rng(options.seed, b);
    std::uniform_int_distribution<std::size_t> pick(0, cells - 1);
    MatrixXd innovations(fit.residuals.rows(), m);
    for (Index r = 0; r < innovations.rows(); ++r) innovations.row(r) = fit.residuals.row(idx(pick(rng)));
    try {
      const PanelDataset sim = regenerate_panel(panel, fit, innovations);
      const PVARFit refit = fit_pvar(sim, spec, fit.first_period);
      draws[b] = irf(refit, cholesky_lower(refit.sigma), k, horizon, options.normalization).responses;
      ok[b] = 1;
    } catch (const Error&) {
      ok[b] = 0;
    }
  });

  std::size_t failed = 0;
  for (char f : ok) failed += f ? 0 : 1;
  if (static_cast<double>(failed) > 0.05 * static_cast<double>(options.reps)) {
    std::ostringstream msg;
    msg << failed << " of " << options.reps << " bootstrap replications failed";
    throw Error(ErrorCode::BootstrapUnstable, msg.str());
  }

  BootstrapBands& bands = result.bands;
  bands.level = options.level;
  bands.n_reps = options.reps;
  bands.seed = options.seed;
  bands.failed_reps = failed;
  bands.lower.resize(m, cols);
  bands.upper.resize(m, cols);
  std::vector<double> column;
  column.reserve(options.reps);
  for (Index v = 0; v < m; ++v) {
    for (Index h = 0; h < cols; ++h) {
      column.clear();
      for (std::size_t b = 0; b < options.reps; ++b) {
        if (ok[b]) column.push_back(draws[b](v, h));
      }
      bands.lower(v, h) = sample_quantile(column, 0.5 * (1.0 - options.level));
      bands.upper(v, h) = sample_quantile(column, 0.5 * (1.0 + options.level));
    }
  }
  return result;
}

}  // namespace causal_pvar
