#include "causal_pvar/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "causal_pvar/error.hpp"

namespace causal_pvar {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

double log_det_spd(const MatrixXd& sigma) {
  Eigen::LDLT<MatrixXd> ldlt(sigma);
  const VectorXd d = ldlt.vectorD();
  double out = 0.0;
  for (Index i = 0; i < d.size(); ++i) out += std::log(d(i));
  return out;
}

// Radius implied by the two-term recurrence z = a*y + b*x fitted to three
// consecutive iterates. Returns NaN when y and x are (numerically) parallel.
double two_term_radius(const VectorXd& x, const VectorXd& y, const VectorXd& z) {
  const double yy = y.dot(y);
  const double xx = x.dot(x);
  const double xy = x.dot(y);
  const double det = yy * xx - xy * xy;
  if (det <= 1e-12 * yy * xx) return std::numeric_limits<double>::quiet_NaN();
  const double zy = z.dot(y);
  const double zx = z.dot(x);
  const double a = (zy * xx - zx * xy) / det;
  const double b = (yy * zx - xy * zy) / det;
  const double disc = a * a + 4.0 * b;
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    return std::max(std::abs(0.5 * (a + s)), std::abs(0.5 * (a - s)));
  }
  return std::sqrt(-b);
}

double gelfand_bound(const MatrixXd& c, std::size_t power) {
  // ||C^k||^(1/k) via repeated squaring with renormalization.
  MatrixXd base = c;
  MatrixXd acc = MatrixXd::Identity(c.rows(), c.cols());
  double log_scale = 0.0;
  std::size_t k = power;
  double base_log = 0.0;
  while (k > 0) {
    if (k & 1U) {
      acc = acc * base;
      log_scale += base_log;
      const double n = acc.norm();
      if (n == 0.0) return 0.0;
      acc /= n;
      log_scale += std::log(n);
    }
    k >>= 1U;
    if (k > 0) {
      base = base * base;
      base_log *= 2.0;
      const double n = base.norm();
      if (n == 0.0) return 0.0;
      base /= n;
      base_log += std::log(n);
    }
  }
  return std::exp((log_scale + std::log(acc.norm())) / static_cast<double>(power));
}

}  // namespace

LagSelectionTable lag_criteria(const PanelDataset& panel, std::size_t max_lag, const PVARSpec& base_spec) {
  if (max_lag < 1 || 3 * max_lag >= panel.n_times) {
    throw Error(ErrorCode::InvalidSpec, "lag selection needs 1 <= pmax < T / 3");
  }
  const double m = static_cast<double>(panel.n_vars());
  LagSelectionTable table;
  table.effective_obs = panel.n_units * (panel.n_times - max_lag);
  const double eff = static_cast<double>(table.effective_obs);

  for (std::size_t p = 1; p <= max_lag; ++p) {
    PVARSpec spec = base_spec;
    spec.lag_order = p;
    const PVARFit fit = fit_pvar(panel, spec, max_lag);
    LagCriteriaRow row;
    row.lag_order = p;
    row.log_det_sigma = log_det_spd(fit.sigma);
    const double k = m * m * static_cast<double>(p);
    row.mbic_like = row.log_det_sigma + k / eff * std::log(eff);
    row.maic_like = row.log_det_sigma + 2.0 * k / eff;
    row.mqic_like = row.log_det_sigma + 2.0 * k / eff * std::log(std::log(eff));
    table.rows.push_back(row);
  }

  auto argmin = [&](double LagCriteriaRow::*field) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
      if (table.rows[r].*field < table.rows[best].*field) best = r;
    }
    return table.rows[best].lag_order;
  };
  table.chosen_mbic = argmin(&LagCriteriaRow::mbic_like);
  table.chosen_maic = argmin(&LagCriteriaRow::maic_like);
  table.chosen_mqic = argmin(&LagCriteriaRow::mqic_like);
  return table;
}

ResidualAutocorrelation residual_autocorr(const PVARFit& fit, std::size_t max_lag, double family_alpha) {
  if (max_lag < 1) throw Error(ErrorCode::InvalidSpec, "autocorrelation needs max_lag >= 1");
  const std::size_t m = fit.n_vars();
  const std::size_t per_unit = fit.periods_per_unit();
  ResidualAutocorrelation out;
  out.max_lag = max_lag;
  out.family_alpha = family_alpha;

  for (std::size_t s = 1; s <= max_lag; ++s) {
    MatrixXd corr = MatrixXd::Zero(idx(m), idx(m));
    if (s < per_unit) {
      const std::size_t pairs = fit.n_units * (per_unit - s);
      // Paired samples: lead rows t, lagged rows t - s, within unit.
      MatrixXd lead(idx(pairs), idx(m));
      MatrixXd lag(idx(pairs), idx(m));
      std::size_t r = 0;
      for (std::size_t i = 0; i < fit.n_units; ++i) {
        for (std::size_t t = s; t < per_unit; ++t, ++r) {
          lead.row(idx(r)) = fit.residuals.row(idx(i * per_unit + t));
          lag.row(idx(r)) = fit.residuals.row(idx(i * per_unit + t - s));
        }
      }
      lead.rowwise() -= lead.colwise().mean();
      lag.rowwise() -= lag.colwise().mean();
      const VectorXd lead_ss = lead.colwise().squaredNorm();
      const VectorXd lag_ss = lag.colwise().squaredNorm();
      const MatrixXd cross = lead.transpose() * lag;
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t l = 0; l < m; ++l) {
          const double denom = std::sqrt(lead_ss(idx(j)) * lag_ss(idx(l)));
          corr(idx(j), idx(l)) = denom > 0.0 ? cross(idx(j), idx(l)) / denom : 0.0;
        }
      }
    }
    out.max_abs_corr = std::max(out.max_abs_corr, corr.cwiseAbs().maxCoeff());
    out.corr.push_back(std::move(corr));
  }

  const double tests = static_cast<double>(m * m * max_lag);
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 1.0 - family_alpha / (2.0 * tests));
  out.bound = z / std::sqrt(static_cast<double>(fit.effective_obs));
  out.violated = out.max_abs_corr > out.bound;
  return out;
}

StationarityReport stationarity(const MatrixXd& c, double tolerance, std::size_t max_iterations) {
  StationarityReport report;
  const Index n = c.rows();
  if (n == 0 || c.cwiseAbs().maxCoeff() == 0.0) {
    report.converged = true;
    report.stationary = true;
    return report;
  }

  VectorXd x(n);
  for (Index i = 0; i < n; ++i) x(i) = 1.0 + 0.5 / static_cast<double>(i + 1);
  x.normalize();

  double previous = std::numeric_limits<double>::quiet_NaN();
  std::size_t settled = 0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    report.iterations = it;
    const VectorXd y = c * x;
    const double ny = y.norm();
    if (ny == 0.0) {
      report.spectral_radius = 0.0;
      report.converged = true;
      break;
    }
    const VectorXd z = c * y;
    double estimate = two_term_radius(x, y, z);
    if (!std::isfinite(estimate)) estimate = ny;
    if (std::isfinite(previous) && std::abs(estimate - previous) <= tolerance * std::max(1.0, estimate)) {
      if (++settled >= 3) {
        report.spectral_radius = estimate;
        report.converged = true;
        break;
      }
    } else {
      settled = 0;
    }
    previous = estimate;
    x = y / ny;
  }
  if (!report.converged) report.spectral_radius = gelfand_bound(c, max_iterations);
  report.stationary = report.spectral_radius < 1.0;
  return report;
}

StationarityReport stationarity(const PVARFit& fit, double tolerance, std::size_t max_iterations) {
  return stationarity(companion(fit).matrix, tolerance, max_iterations);
}

PolicyProbe policy_regime_probe(std::span<const double> series) {
  if (series.size() < 30) throw Error(ErrorCode::InvalidSpec, "policy probe needs at least 30 observations");
  PolicyProbe probe;
  probe.n = series.size();
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  std::size_t zeros = 0;
  for (double v : series) {
    mean += v;
    if (v == 0.0) ++zeros;
  }
  mean /= n;
  probe.share_zero = static_cast<double>(zeros) / n;

  std::vector<double> centered;
  centered.reserve(series.size());
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double v : series) {
    const double d = v - mean;
    centered.push_back(d);
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;

  std::sort(centered.begin(), centered.end());
  const double scale = std::max(1.0, std::abs(centered.back() - centered.front()));
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < centered.size() && distinct <= 2; ++i) {
    if (centered[i] - centered[i - 1] > 1e-12 * scale) ++distinct;
  }
  probe.is_binary = distinct <= 2;

  if (m2 > 0.0) {
    probe.skewness = m3 / std::pow(m2, 1.5);
    probe.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  probe.normality_stat = n * probe.skewness * probe.skewness / 6.0 +
                         n * probe.excess_kurtosis * probe.excess_kurtosis / 24.0;
  return probe;
}

DiagnosticsReport diagnose(const PVARFit& fit, std::size_t n_policies, std::size_t max_lag) {
  DiagnosticsReport report;
  report.autocorr = residual_autocorr(fit, max_lag);
  report.stationarity = stationarity(fit);
  for (std::size_t k = 0; k < n_policies; ++k) {
    const VectorXd col = fit.residuals.col(idx(k));
    report.policy_probes.push_back(
        policy_regime_probe(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
  }
  return report;
}

}  // namespace causal_pvar
