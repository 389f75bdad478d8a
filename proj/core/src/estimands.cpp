#include "causal_pvar/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "causal_pvar/error.hpp"

namespace causal_pvar {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const VectorXd& v) { return v.mean(); }

double se_of(const VectorXd& v) {
  const auto n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  const double var = (v.array() - v.mean()).square().sum() / (n - 1.0);
  return std::sqrt(var / n);
}

// First index of the smooth part of the grid (the zero atom is isolated).
std::size_t smooth_start(bool zero_atom) { return zero_atom ? 1 : 0; }

// Finite-difference derivative of values on the smooth part of the grid:
// central in the interior, one-sided at the ends. NaN inputs propagate.
double grid_derivative(const std::vector<double>& grid, bool zero_atom, std::size_t b,
                       const auto& value_at) {
  const std::size_t first = smooth_start(zero_atom);
  const std::size_t last = grid.size() - 1;
  if (b < first || last <= first) return kNaN;
  const std::size_t lo = b == first ? b : b - 1;
  const std::size_t hi = b == last ? b : b + 1;
  return (value_at(hi) - value_at(lo)) / (grid[hi] - grid[lo]);
}

bool dummy_grid(const PotentialOutcomePanel& pop) {
  return !pop.zero_atom && pop.grid.size() == 2 && pop.grid[0] == 0.0 && pop.grid[1] == 1.0;
}

}  // namespace

std::size_t grid_bin(const std::vector<double>& grid, bool zero_atom, double dose) {
  if (grid.empty()) throw Error(ErrorCode::GridMismatch, "empty dose grid");
  if (zero_atom && dose == 0.0) return 0;
  const std::size_t first = smooth_start(zero_atom);
  if (grid.size() <= first + 1) return first < grid.size() ? first : 0;
  const auto begin = grid.begin() + static_cast<std::ptrdiff_t>(first);
  auto it = std::lower_bound(begin, grid.end(), dose);
  if (it == grid.end()) return grid.size() - 1;
  if (it == begin) return first;
  const auto prev = it - 1;
  return static_cast<std::size_t>((dose - *prev <= *it - dose ? prev : it) - grid.begin());
}

double selection_bias(const PotentialOutcomePanel& pop) {
  if (!dummy_grid(pop)) throw Error(ErrorCode::InvalidSpec, "selection bias needs a dummy policy");
  const VectorXd& w = pop.assignment;
  const double p = w.mean();
  if (p <= 0.0 || p >= 1.0) {
    throw Error(ErrorCode::DegenerateAssignment, "assignment is all treated or all control");
  }
  const VectorXd y1 = pop.po_grid.col(1);
  const VectorXd y0 = pop.po_grid.col(0);
  const VectorXd wc = w.array() - p;
  const double cov1 = (y1.array() - y1.mean()).matrix().dot(wc) / static_cast<double>(w.size());
  const double cov0 = -(y0.array() - y0.mean()).matrix().dot(wc) / static_cast<double>(w.size());
  return cov1 / p - cov0 / (1.0 - p);
}

EstimandReport oracle_estimands(const PotentialOutcomePanel& pop) {
  const std::size_t n = pop.cells();
  const std::size_t g = pop.grid.size();
  if (n == 0 || static_cast<std::size_t>(pop.po_grid.rows()) != n ||
      static_cast<std::size_t>(pop.po_grid.cols()) != g) {
    throw Error(ErrorCode::GridMismatch, "potential-outcome grid does not cover the cells");
  }
  EstimandReport r;
  r.grid = pop.grid;
  r.zero_atom = pop.zero_atom;
  r.ate = r.att = r.selection_bias = r.ate_at_dl = kNaN;

  if (dummy_grid(pop)) {
    const VectorXd effect = pop.po_grid.col(1) - pop.po_grid.col(0);
    r.ate = mean_of(effect);
    r.mc_se.ate = se_of(effect);
    std::vector<double> treated;
    for (std::size_t c = 0; c < n; ++c) {
      if (pop.assignment(idx(c)) != 0.0) treated.push_back(effect(idx(c)));
    }
    if (treated.empty()) throw Error(ErrorCode::EmptyTreatedSet, "no treated cells");
    const VectorXd t = Eigen::Map<const VectorXd>(treated.data(), idx(treated.size()));
    r.att = mean_of(t);
    r.mc_se.att = se_of(t);
    if (treated.size() < n) {
      r.selection_bias = selection_bias(pop);
      // Linearization of the two covariance ratios around the sample means.
      const double p = pop.assignment.mean();
      const VectorXd y1 = pop.po_grid.col(1);
      const VectorXd y0 = pop.po_grid.col(0);
      double m1t = 0.0, m0c = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        if (pop.assignment(idx(c)) != 0.0) m1t += y1(idx(c));
        else m0c += y0(idx(c));
      }
      m1t /= p * static_cast<double>(n);
      m0c /= (1.0 - p) * static_cast<double>(n);
      const double y1_mean = y1.mean();
      const double y0_mean = y0.mean();
      VectorXd psi(idx(n));
      for (std::size_t c = 0; c < n; ++c) {
        const auto k = idx(c);
        const double w = pop.assignment(k) != 0.0 ? 1.0 : 0.0;
        psi(k) = w * (y1(k) - m1t) / p - (y1(k) - y1_mean) - (1.0 - w) * (y0(k) - m0c) / (1.0 - p) +
                 (y0(k) - y0_mean);
      }
      r.mc_se.selection_bias = se_of(psi);
    }
  }
  if (pop.zero_atom && g >= 2) {
    const VectorXd jump = pop.po_grid.col(1) - pop.po_grid.col(0);
    r.ate_at_dl = mean_of(jump);
    r.mc_se.ate_at_dl = se_of(jump);
  }

  const VectorXd col_mean = pop.po_grid.colwise().mean().transpose();
  r.acr.resize(g);
  for (std::size_t b = 0; b < g; ++b) {
    r.acr[b] = grid_derivative(pop.grid, pop.zero_atom, b, [&](std::size_t k) { return col_mean(idx(k)); });
  }

  std::vector<double> slope_sum(g, 0.0);
  std::vector<double> level_sum(g, 0.0);
  r.bin_count.assign(g, 0);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t b = grid_bin(pop.grid, pop.zero_atom, pop.assignment(idx(c)));
    ++r.bin_count[b];
    level_sum[b] += pop.po_grid(idx(c), idx(b));
    slope_sum[b] +=
        grid_derivative(pop.grid, pop.zero_atom, b, [&](std::size_t k) { return pop.po_grid(idx(c), idx(k)); });
  }
  r.acrt.assign(g, kNaN);
  r.cond_mean.assign(g, kNaN);
  for (std::size_t b = 0; b < g; ++b) {
    if (r.bin_count[b] == 0) continue;
    const auto count = static_cast<double>(r.bin_count[b]);
    r.cond_mean[b] = level_sum[b] / count;
    r.acrt[b] = slope_sum[b] / count;
  }
  r.cond_mean_slope.resize(g);
  for (std::size_t b = 0; b < g; ++b) {
    r.cond_mean_slope[b] = grid_derivative(pop.grid, pop.zero_atom, b, [&](std::size_t k) { return r.cond_mean[k]; });
  }
  return r;
}

double did_four_means(const VectorXd& outcome, const std::vector<char>& unit_treated,
                      const std::vector<char>& period_treated) {
  const std::size_t n = unit_treated.size();
  const std::size_t t_count = period_treated.size();
  if (static_cast<std::size_t>(outcome.size()) != n * t_count) {
    throw Error(ErrorCode::InvalidSpec, "outcome length differs from units x periods");
  }
  double sum[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  std::size_t count[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i) {
    const int gi = unit_treated[i] ? 1 : 0;
    for (std::size_t t = 0; t < t_count; ++t) {
      const int gt = period_treated[t] ? 1 : 0;
      sum[gi][gt] += outcome(idx(i * t_count + t));
      ++count[gi][gt];
    }
  }
  for (const auto& row : count) {
    for (std::size_t c : row) {
      if (c == 0) throw Error(ErrorCode::EmptyCell, "a unit-group by period-group cell is empty");
    }
  }
  auto mean = [&](int gi, int gt) { return sum[gi][gt] / static_cast<double>(count[gi][gt]); };
  return mean(1, 1) - mean(0, 1) - mean(1, 0) + mean(0, 0);
}

VectorXd two_way_demean(const VectorXd& values, std::size_t n_units, std::size_t n_times) {
  if (static_cast<std::size_t>(values.size()) != n_units * n_times) {
    throw Error(ErrorCode::InvalidSpec, "values length differs from units x periods");
  }
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> grid(
      values.data(), idx(n_units), idx(n_times));
  const VectorXd unit_mean = grid.rowwise().mean();
  const Eigen::RowVectorXd time_mean = grid.colwise().mean();
  const double grand = grid.mean();
  VectorXd out(values.size());
  for (std::size_t i = 0; i < n_units; ++i) {
    for (std::size_t t = 0; t < n_times; ++t) {
      out(idx(i * n_times + t)) = grid(idx(i), idx(t)) - unit_mean(idx(i)) - time_mean(idx(t)) + grand;
    }
  }
  return out;
}

ExposureEffects oracle_atte_aste(const PotentialOutcomePanel& pop) {
  if (pop.po_exposure.cols() != 4 || static_cast<std::size_t>(pop.po_exposure.rows()) != pop.cells()) {
    throw Error(ErrorCode::InvalidSpec, "panel carries no exposure potential outcomes");
  }
  ExposureEffects out;
  double total = 0.0;
  double spill = 0.0;
  for (std::size_t c = 0; c < pop.cells(); ++c) {
    if (pop.assignment(idx(c)) == 0.0) continue;
    const auto r = idx(c);
    total += pop.po_exposure(r, 3) - pop.po_exposure(r, 0);
    spill += pop.po_exposure(r, 1) - pop.po_exposure(r, 0);
    ++out.treated_cells;
  }
  if (out.treated_cells == 0) throw Error(ErrorCode::NoTreatedCells, "no treated cells");
  out.atte = total / static_cast<double>(out.treated_cells);
  out.aste = spill / static_cast<double>(out.treated_cells);
  return out;
}

}  // namespace causal_pvar
