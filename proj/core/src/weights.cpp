#include "causal_pvar/weights.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "causal_pvar/error.hpp"

namespace causal_pvar {

namespace {

constexpr double kMassTolerance = 1e-6;

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n <= 1 || lo == hi) return {lo};
  std::vector<double> out(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) out[k] = lo + step * static_cast<double>(k);
  out[n - 1] = hi;
  return out;
}

void require_sorted(const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorCode::GridMismatch, "dose grid is empty");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw Error(ErrorCode::GridMismatch, "dose grid must be strictly increasing");
  }
}

struct Moments {
  double p_pos = 0.0;
  double mean = 0.0;
  double second = 0.0;
  double var = 0.0;
  double d_lower = 0.0;
  double d_upper = 0.0;
};

// q0 and the exact integral of q1 over [d_L, d_U] follow from the first two
// moments: int E[W 1{W >= x}] dx = E[W^2] - d_L E[W] and
// int P(W >= x) dx = E[W] - d_L P(W > 0).
void finish_nonneg(WeightProfile& profile, const Moments& mom) {
  profile.d_lower = mom.d_lower;
  profile.d_upper = mom.d_upper;
  profile.q0 = mom.mean * (1.0 - mom.p_pos) * mom.d_lower / mom.var;
  profile.mass = (mom.second - mom.d_lower * mom.mean - mom.mean * (mom.mean - mom.d_lower * mom.p_pos)) / mom.var;
  profile.no_zero_mass = mom.p_pos >= 1.0;
}

bool same_grid(const std::vector<double>& a, std::size_t offset, const std::vector<double>& b) {
  if (a.size() != b.size() + offset) return false;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const double scale = std::max({1.0, std::abs(a[k + offset]), std::abs(b[k])});
    if (std::abs(a[k + offset] - b[k]) > 1e-12 * scale) return false;
  }
  return true;
}

std::vector<double> with_fallback(const std::vector<double>& values, const std::vector<double>& fallback,
                                  std::size_t offset, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double v = values[k + offset];
    out[k] = std::isfinite(v) ? v : fallback[k + offset];
    if (!std::isfinite(out[k])) out[k] = 0.0;
  }
  return out;
}

}  // namespace

double trapezoid(const std::vector<double>& grid, const std::vector<double>& values) {
  if (grid.size() != values.size()) throw Error(ErrorCode::GridMismatch, "values do not match the grid");
  double out = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    out += 0.5 * (values[k] + values[k - 1]) * (grid[k] - grid[k - 1]);
  }
  return out;
}

WeightProfile gaussian_weights(double sigma, const std::vector<double>& grid) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::InvalidSpec, "sigma must be positive");
  require_sorted(grid);
  const boost::math::normal law(0.0, sigma);
  WeightProfile profile;
  profile.grid = grid;
  profile.mass = boost::math::cdf(law, grid.back()) - boost::math::cdf(law, grid.front());
  if (profile.mass < 1.0 - kMassTolerance) {
    throw Error(ErrorCode::GridTooNarrow, "grid captures only " + std::to_string(profile.mass) + " of the mass");
  }
  const double mean = 0.0;
  const double var = sigma * sigma;
  for (double x : grid) {
    const double f = boost::math::pdf(law, x);
    const double cdf = boost::math::cdf(law, x);
    // theta(x) = int_{-inf}^{x} m f(m) dm = -sigma^2 f(x) for a centred normal.
    const double theta = -var * f;
    profile.cdf.push_back(cdf);
    profile.theta.push_back(theta);
    profile.q.push_back((mean * cdf - theta) / var);
  }
  profile.no_zero_mass = true;
  return profile;
}

WeightProfile nonneg_weights(const NonNegLaw& law, std::vector<double> grid, std::size_t points) {
  if (!(law.zero_prob >= 0.0 && law.zero_prob < 1.0)) throw Error(ErrorCode::InvalidSpec, "zero_prob must lie in [0, 1)");
  if (!(law.d_lower > 0.0 && law.d_lower <= law.d_upper)) throw Error(ErrorCode::InvalidSpec, "need 0 < d_L <= d_U");
  const double lo = law.d_lower;
  const double hi = law.d_upper;
  if (grid.empty()) grid = linspace(lo, hi, points);
  require_sorted(grid);
  if (grid.front() < lo || grid.back() > hi) throw Error(ErrorCode::GridMismatch, "grid leaves [d_L, d_U]");

  Moments mom;
  mom.p_pos = 1.0 - law.zero_prob;
  mom.mean = mom.p_pos * 0.5 * (lo + hi);
  mom.second = mom.p_pos * (lo * lo + lo * hi + hi * hi) / 3.0;
  mom.var = mom.second - mom.mean * mom.mean;
  mom.d_lower = lo;
  mom.d_upper = hi;
  if (!(mom.var > 0.0)) throw Error(ErrorCode::InvalidSpec, "dose has no variance");

  WeightProfile profile;
  profile.grid = grid;
  for (double x : grid) {
    double p_ge = mom.p_pos;
    double s_ge = mom.p_pos * lo;
    if (hi > lo) {
      p_ge = mom.p_pos * (hi - x) / (hi - lo);
      s_ge = mom.p_pos * (hi * hi - x * x) / (2.0 * (hi - lo));
    }
    profile.q1.push_back((s_ge - mom.mean * p_ge) / mom.var);
  }
  finish_nonneg(profile, mom);
  return profile;
}

WeightProfile nonneg_weights(std::span<const double> sample, std::vector<double> grid, std::size_t points) {
  if (sample.empty()) throw Error(ErrorCode::InvalidSpec, "empty dose sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  for (double w : sorted) {
    if (!std::isfinite(w)) throw Error(ErrorCode::NonFinite, "dose sample contains non-finite values");
    if (w < 0.0) throw Error(ErrorCode::InvalidSpec, "dose sample contains negative values");
  }
  std::sort(sorted.begin(), sorted.end());
  if (sorted.back() == 0.0) throw Error(ErrorCode::AllZeros, "every dose is zero");

  const auto n = static_cast<double>(sorted.size());
  const auto first_pos = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
  Moments mom;
  mom.p_pos = static_cast<double>(sorted.end() - first_pos) / n;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : sorted) {
    sum += w;
    sum_sq += w * w;
  }
  mom.mean = sum / n;
  mom.second = sum_sq / n;
  mom.var = mom.second - mom.mean * mom.mean;
  mom.d_lower = *first_pos;
  mom.d_upper = sorted.back();
  if (!(mom.var > 0.0)) throw Error(ErrorCode::InvalidSpec, "dose has no variance");

  if (grid.empty()) grid = linspace(mom.d_lower, mom.d_upper, points);
  require_sorted(grid);
  if (grid.front() < mom.d_lower || grid.back() > mom.d_upper) {
    throw Error(ErrorCode::GridMismatch, "grid leaves [d_L, d_U]");
  }

  // Suffix sums give E[W 1{W >= x}] for any x by binary search.
  std::vector<double> suffix(sorted.size() + 1, 0.0);
  for (std::size_t k = sorted.size(); k-- > 0;) suffix[k] = suffix[k + 1] + sorted[k];

  WeightProfile profile;
  profile.grid = grid;
  for (double x : grid) {
    const auto pos = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
    const double p_ge = static_cast<double>(sorted.size() - pos) / n;
    const double s_ge = suffix[pos] / n;
    profile.q1.push_back((s_ge - mom.mean * p_ge) / mom.var);
  }
  finish_nonneg(profile, mom);
  return profile;
}

double weighted_integral(const WeightProfile& profile, const std::vector<double>& values) {
  const std::vector<double>& weights = profile.q.empty() ? profile.q1 : profile.q;
  if (weights.size() != profile.grid.size() || values.size() != profile.grid.size()) {
    throw Error(ErrorCode::GridMismatch, "values do not match the weight grid");
  }
  std::vector<double> product(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) product[k] = weights[k] * values[k];
  return trapezoid(profile.grid, product);
}

double weighted_estimand(const WeightProfile& profile, const EstimandReport& report, WeightedMode mode) {
  const bool gaussian = mode == WeightedMode::GaussianAcr || mode == WeightedMode::GaussianAcrt ||
                        mode == WeightedMode::GaussianConditional;
  if (gaussian) {
    if (profile.q.empty() || report.zero_atom || !same_grid(report.grid, 0, profile.grid)) {
      throw Error(ErrorCode::GridMismatch, "Gaussian weights and estimands are on different grids");
    }
    const std::size_t g = profile.grid.size();
    const std::vector<double>& source = mode == WeightedMode::GaussianAcr    ? report.acr
                                        : mode == WeightedMode::GaussianAcrt ? report.acrt
                                                                             : report.cond_mean_slope;
    return weighted_integral(profile, with_fallback(source, report.acr, 0, g));
  }

  if (profile.q1.empty() || !report.zero_atom || !same_grid(report.grid, 1, profile.grid)) {
    throw Error(ErrorCode::GridMismatch, "non-negative weights and estimands are on different grids");
  }
  const std::size_t g = profile.grid.size();
  const std::vector<double>& source = mode == WeightedMode::NonNegAcrtAte ? report.acrt : report.cond_mean_slope;
  const double continuous = g > 1 ? weighted_integral(profile, with_fallback(source, report.acr, 1, g)) : 0.0;
  double jump = report.ate_at_dl;
  if (mode == WeightedMode::NonNegConditional) {
    if (!std::isfinite(report.cond_mean[0]) || !std::isfinite(report.cond_mean[1])) {
      throw Error(ErrorCode::EmptyCell, "no cells at the zero dose or in the first positive bin");
    }
    jump = report.cond_mean[1] - report.cond_mean[0];
  }
  return continuous + profile.q0 * jump / profile.d_lower;
}

}  // namespace causal_pvar
