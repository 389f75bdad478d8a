#include "causal_pvar/panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "causal_pvar/error.hpp"

namespace causal_pvar {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

// Subtracts per-unit column means from a unit-major block matrix whose
// units each occupy `rows_per_unit` consecutive rows. Returns the means.
MatrixXd demean_by_unit(MatrixXd& block, std::size_t n_units, std::size_t rows_per_unit) {
  MatrixXd means(idx(n_units), block.cols());
  for (std::size_t i = 0; i < n_units; ++i) {
    auto rows = block.middleRows(idx(i * rows_per_unit), idx(rows_per_unit));
    means.row(idx(i)) = rows.colwise().mean();
    rows.rowwise() -= means.row(idx(i));
  }
  return means;
}

bool full_column_rank(const MatrixXd& x) {
  if (x.cols() == 0) return true;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  return qr.rank() == x.cols();
}

}  // namespace

PanelDataset assemble_panel(std::vector<PanelRecord> records,
                            std::vector<std::string> variable_names,
                            std::size_t n_policies) {
  if (records.empty()) {
    throw Error(ErrorCode::UnbalancedPanel, "panel has no observations");
  }
  std::sort(records.begin(), records.end(), [](const PanelRecord& a, const PanelRecord& b) {
    return a.unit != b.unit ? a.unit < b.unit : a.time < b.time;
  });

  for (std::size_t k = 1; k < records.size(); ++k) {
    if (records[k].unit == records[k - 1].unit && records[k].time == records[k - 1].time) {
      std::ostringstream msg;
      msg << "duplicate observation for unit " << records[k].unit << ", time " << records[k].time;
      throw Error(ErrorCode::UnbalancedPanel, msg.str());
    }
  }

  std::vector<long> units;
  std::vector<long> times;
  for (const auto& r : records) {
    units.push_back(r.unit);
    times.push_back(r.time);
  }
  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const std::size_t m = variable_names.size();
  PanelDataset panel;
  panel.n_units = units.size();
  panel.n_times = times.size();
  panel.n_policies = n_policies;
  panel.n_outcomes = m >= n_policies ? m - n_policies : 0;
  panel.variable_names = std::move(variable_names);
  panel.unit_ids = units;
  panel.time_ids = times;
  panel.values.resize(idx(units.size() * times.size()), idx(m));
  panel.exogenous_dummies.resize(panel.values.rows(), 0);

  std::size_t k = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    for (std::size_t t = 0; t < times.size(); ++t) {
      if (k >= records.size() || records[k].unit != units[i] || records[k].time != times[t]) {
        std::ostringstream msg;
        msg << "missing observation for unit " << units[i] << ", time " << times[t];
        throw Error(ErrorCode::UnbalancedPanel, msg.str());
      }
      if (records[k].values.size() != m) {
        std::ostringstream msg;
        msg << "unit " << units[i] << ", time " << times[t] << " has " << records[k].values.size()
            << " values, expected " << m;
        throw Error(ErrorCode::BadOrdering, msg.str());
      }
      for (std::size_t v = 0; v < m; ++v) {
        panel.values(idx(panel.row(i, t)), idx(v)) = records[k].values[v];
      }
      ++k;
    }
  }
  return validate_panel(std::move(panel));
}

PanelDataset validate_panel(PanelDataset raw) {
  const std::size_t m = raw.n_policies + raw.n_outcomes;
  if (raw.n_outcomes == 0 || m < 2 || static_cast<std::size_t>(raw.values.cols()) != m) {
    std::ostringstream msg;
    msg << "K + J = " << raw.n_policies << " + " << raw.n_outcomes << " does not match "
        << raw.values.cols() << " variables (need J >= 1 and m >= 2)";
    throw Error(ErrorCode::BadOrdering, msg.str());
  }
  if (!raw.variable_names.empty() && raw.variable_names.size() != m) {
    throw Error(ErrorCode::BadOrdering, "variable_names does not list every series");
  }
  if (raw.n_units == 0 || raw.n_times == 0 ||
      static_cast<std::size_t>(raw.values.rows()) != raw.n_units * raw.n_times) {
    std::ostringstream msg;
    msg << "expected " << raw.n_units << " x " << raw.n_times << " cells, got " << raw.values.rows();
    throw Error(ErrorCode::UnbalancedPanel, msg.str());
  }
  if (raw.exogenous_dummies.cols() > 0 && raw.exogenous_dummies.rows() != raw.values.rows()) {
    throw Error(ErrorCode::UnbalancedPanel, "dummy matrix does not cover every cell");
  }
  if (raw.exogenous_dummies.cols() == 0) raw.exogenous_dummies.resize(raw.values.rows(), 0);

  for (std::size_t i = 0; i < raw.n_units; ++i) {
    for (std::size_t t = 0; t < raw.n_times; ++t) {
      for (std::size_t v = 0; v < m; ++v) {
        if (!std::isfinite(raw.at(i, t, v))) {
          std::ostringstream msg;
          msg << "non-finite value at unit index " << i << ", time index " << t << ", variable "
              << v;
          throw Error(ErrorCode::NonFinite, msg.str());
        }
      }
    }
  }
  if (!raw.exogenous_dummies.allFinite()) {
    throw Error(ErrorCode::NonFinite, "non-finite exogenous dummy value");
  }

  if (raw.variable_names.empty()) {
    for (std::size_t k = 0; k < raw.n_policies; ++k) raw.variable_names.push_back("W" + std::to_string(k + 1));
    for (std::size_t j = 0; j < raw.n_outcomes; ++j) raw.variable_names.push_back("Y" + std::to_string(j + 1));
  }
  if (raw.unit_ids.size() != raw.n_units) {
    raw.unit_ids.resize(raw.n_units);
    std::iota(raw.unit_ids.begin(), raw.unit_ids.end(), 0L);
  }
  if (raw.time_ids.size() != raw.n_times) {
    raw.time_ids.resize(raw.n_times);
    std::iota(raw.time_ids.begin(), raw.time_ids.end(), 0L);
  }
  return raw;
}

PanelDataset within_demean(const PanelDataset& panel, const PVARSpec& spec) {
  PanelDataset out = panel;
  if (spec.include_unit_effects) demean_by_unit(out.values, out.n_units, out.n_times);
  if (spec.dummy_columns.empty()) return out;

  MatrixXd dummies(out.values.rows(), idx(spec.dummy_columns.size()));
  for (std::size_t d = 0; d < spec.dummy_columns.size(); ++d) {
    if (spec.dummy_columns[d] >= static_cast<std::size_t>(panel.exogenous_dummies.cols())) {
      throw Error(ErrorCode::InvalidSpec, "dummy column index out of range");
    }
    dummies.col(idx(d)) = panel.exogenous_dummies.col(idx(spec.dummy_columns[d]));
  }
  if (spec.include_unit_effects) demean_by_unit(dummies, out.n_units, out.n_times);
  if (!full_column_rank(dummies)) {
    throw Error(ErrorCode::DegenerateDummy, "dummy columns are collinear with the unit means");
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(dummies);
  const MatrixXd coef = qr.solve(out.values);
  out.values -= dummies * coef;
  return out;
}

PVARFit fit_pvar(const PanelDataset& panel, const PVARSpec& spec,
                 std::optional<std::size_t> first_period) {
  const std::size_t m = panel.n_vars();
  const std::size_t p = spec.lag_order;
  const std::size_t n = panel.n_units;
  const std::size_t big_t = panel.n_times;
  if (p < 1 || p + 1 >= big_t) {
    throw Error(ErrorCode::InvalidSpec, "lag order must satisfy 1 <= p < T - 1");
  }
  const std::size_t start = first_period.value_or(p);
  if (start < p || start >= big_t) {
    throw Error(ErrorCode::InvalidSpec, "estimation sample start must lie in [p, T)");
  }
  const std::size_t per_unit = big_t - start;
  if (per_unit < m * p + 2) {
    std::ostringstream msg;
    msg << "only " << per_unit << " usable periods per unit; need at least " << m * p + 2;
    throw Error(ErrorCode::InsufficientObs, msg.str());
  }
  const std::size_t d = spec.dummy_columns.size();
  for (auto c : spec.dummy_columns) {
    if (c >= static_cast<std::size_t>(panel.exogenous_dummies.cols())) {
      throw Error(ErrorCode::InvalidSpec, "dummy column index out of range");
    }
  }

  const std::size_t rows = n * per_unit;
  const std::size_t lag_cols = m * p;
  MatrixXd y(idx(rows), idx(m));
  MatrixXd x(idx(rows), idx(lag_cols + d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = start; t < big_t; ++t) {
      const Index r = idx(i * per_unit + (t - start));
      y.row(r) = panel.values.row(idx(panel.row(i, t)));
      for (std::size_t l = 1; l <= p; ++l) {
        x.block(r, idx((l - 1) * m), 1, idx(m)) = panel.values.row(idx(panel.row(i, t - l)));
      }
      for (std::size_t c = 0; c < d; ++c) {
        x(r, idx(lag_cols + c)) = panel.exogenous_dummies(idx(panel.row(i, t)), idx(spec.dummy_columns[c]));
      }
    }
  }

  MatrixXd y_means = MatrixXd::Zero(idx(n), idx(m));
  MatrixXd x_means = MatrixXd::Zero(idx(n), x.cols());
  if (spec.include_unit_effects) {
    y_means = demean_by_unit(y, n, per_unit);
    x_means = demean_by_unit(x, n, per_unit);
  }

  if (d > 0 && !full_column_rank(x.rightCols(idx(d)))) {
    throw Error(ErrorCode::DegenerateDummy, "dummy columns are collinear with the unit means");
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw Error(ErrorCode::SingularDesign, "lagged regressor matrix is rank deficient");
  }
  const MatrixXd coef = qr.solve(y);

  PVARFit fit;
  fit.spec = spec;
  fit.n_units = n;
  fit.n_times = big_t;
  fit.first_period = start;
  fit.effective_obs = rows;
  fit.phi.reserve(p);
  for (std::size_t l = 0; l < p; ++l) {
    fit.phi.push_back(coef.middleRows(idx(l * m), idx(m)).transpose());
  }
  fit.dummy_coef = coef.bottomRows(idx(d)).transpose();
  fit.residuals = y - x * coef;
  fit.sigma = (fit.residuals.transpose() * fit.residuals) / static_cast<double>(rows);
  fit.sigma = 0.5 * (fit.sigma + fit.sigma.transpose());

  // c_i = ybar_i - B' xbar_i, mu_i = (I - sum phi)^{-1} c_i.
  fit.intercept = y_means - x_means * coef;
  MatrixXd long_run = MatrixXd::Identity(idx(m), idx(m));
  for (const auto& ph : fit.phi) long_run -= ph;
  Eigen::FullPivLU<MatrixXd> lu(long_run);
  if (lu.isInvertible()) {
    fit.mu = lu.solve(fit.intercept.transpose()).transpose();
  } else {
    fit.mu = MatrixXd::Constant(idx(n), idx(m), std::numeric_limits<double>::quiet_NaN());
  }
  return fit;
}

CompanionMatrix companion(const std::vector<Eigen::MatrixXd>& phi) {
  CompanionMatrix c;
  c.p = phi.size();
  c.m = phi.empty() ? 0 : static_cast<std::size_t>(phi.front().rows());
  const Index m = idx(c.m);
  const Index mp = idx(c.m * c.p);
  c.matrix = MatrixXd::Zero(mp, mp);
  for (std::size_t l = 0; l < c.p; ++l) c.matrix.block(0, idx(l) * m, m, m) = phi[l];
  if (c.p > 1) c.matrix.bottomLeftCorner(mp - m, mp - m).setIdentity();
  return c;
}

CompanionMatrix companion(const PVARFit& fit) { return companion(fit.phi); }

}  // namespace causal_pvar
