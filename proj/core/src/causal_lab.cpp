#include "causal_pvar/causal_lab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "causal_pvar/error.hpp"
#include "causal_pvar/random.hpp"

namespace causal_pvar {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_config(const std::string& msg) { throw Error(ErrorCode::BadConfig, msg); }

double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(out)) {
    bad_config("invalid number for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return out;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    bad_config("invalid non-negative integer for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return out;
}

std::vector<MatrixXd> parse_phi(std::string_view text) {
  std::vector<double> values;
  while (!text.empty()) {
    const auto comma = text.find(',');
    values.push_back(parse_double("phi", text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (values.empty() || values.size() % 4 != 0) {
    bad_config("phi needs 4 * p comma-separated values (row-major 2 x 2 per lag)");
  }
  std::vector<MatrixXd> phi;
  for (std::size_t l = 0; l < values.size() / 4; ++l) {
    MatrixXd block(2, 2);
    block << values[4 * l], values[4 * l + 1], values[4 * l + 2], values[4 * l + 3];
    phi.push_back(block);
  }
  return phi;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) out[k] = lo + step * static_cast<double>(k);
  out[n - 1] = hi;
  return out;
}

std::size_t clamp_count(double target, std::size_t lo, std::size_t hi) {
  const auto rounded = static_cast<std::size_t>(std::max(0.0, std::round(target)));
  return std::clamp(rounded, lo, hi);
}

// Picks `count` distinct indices out of n, returned as a 0/1 mask.
std::vector<char> random_subset(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = n; k > 1; --k) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::swap(order[k - 1], order[pick(rng)]);
  }
  std::vector<char> mask(n, 0);
  for (std::size_t k = 0; k < count; ++k) mask[order[k]] = 1;
  return mask;
}

// Runs x_it = c_i + sum_l phi_l x_{i,t-l} + shock_it. `innovations` holds the
// observed-period shocks (cells x m); burn-in shocks are standard normal.
MatrixXd propagate(const std::vector<MatrixXd>& phi, const MatrixXd& mu, const MatrixXd& innovations,
                   std::size_t n_units, std::size_t n_times, std::size_t burn_in, const MatrixXd& burn_chol,
                   Rng& rng) {
  const Index m = mu.cols();
  const std::size_t p = phi.size();
  MatrixXd phi_sum = MatrixXd::Zero(m, m);
  for (const auto& block : phi) phi_sum += block;
  const MatrixXd lead = MatrixXd::Identity(m, m) - phi_sum;

  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd values(idx(n_units * n_times), m);
  std::vector<VectorXd> history(p);
  for (std::size_t i = 0; i < n_units; ++i) {
    const VectorXd level = mu.row(idx(i)).transpose();
    const VectorXd intercept = lead * level;
    for (auto& h : history) h = level;
    auto step = [&](const VectorXd& shock) {
      VectorXd x = intercept + shock;
      for (std::size_t l = 0; l < p; ++l) x.noalias() += phi[l] * history[l];
      for (std::size_t l = p; l-- > 1;) history[l] = history[l - 1];
      history[0] = x;
      return x;
    };
    for (std::size_t b = 0; b < burn_in; ++b) {
      VectorXd z(m);
      for (Index v = 0; v < m; ++v) z(v) = normal(rng);
      step(burn_chol * z);
    }
    for (std::size_t t = 0; t < n_times; ++t) {
      const std::size_t row = i * n_times + t;
      values.row(idx(row)) = step(innovations.row(idx(row)).transpose()).transpose();
    }
  }
  return values;
}

bool is_dummy(Regime r) {
  return r == Regime::HomogeneousDummy || r == Regime::HeterogeneousDummy || r == Regime::SpilloverDummy;
}

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::HomogeneousDummy: return "homogeneous_dummy";
    case Regime::GaussianContinuous: return "gaussian_continuous";
    case Regime::NonNegativeContinuous: return "nonnegative_continuous";
    case Regime::HeterogeneousDummy: return "heterogeneous_dummy";
    case Regime::SpilloverDummy: return "spillover_dummy";
  }
  return "unknown";
}

Regime parse_regime(std::string_view text) {
  for (Regime r : {Regime::HomogeneousDummy, Regime::GaussianContinuous, Regime::NonNegativeContinuous,
                   Regime::HeterogeneousDummy, Regime::SpilloverDummy}) {
    if (text == to_string(r)) return r;
  }
  bad_config("unknown regime '" + std::string(text) + "'");
}

double ImpactFunction::operator()(double x) const {
  switch (kind) {
    case Kind::Linear: return a * x;
    case Kind::Quadratic: return a * x + b * x * x;
    case Kind::Step: return x >= b ? a : 0.0;
  }
  return 0.0;
}

double ImpactFunction::derivative(double x) const {
  switch (kind) {
    case Kind::Linear: return a;
    case Kind::Quadratic: return a + 2.0 * b * x;
    case Kind::Step: return 0.0;
  }
  return 0.0;
}

void validate_config(const ScenarioConfig& c) {
  if (c.n_units < 2) bad_config("n_units must be at least 2");
  if (c.n_times < 4) bad_config("n_times must be at least 4");
  if (c.phi.empty()) bad_config("phi needs at least one lag");
  for (const auto& block : c.phi) {
    if (block.rows() != 2 || block.cols() != 2 || !block.allFinite()) {
      bad_config("phi blocks must be finite 2 x 2 matrices");
    }
  }
  if (!(c.mu_scale >= 0.0) || !(c.outcome_noise_sd >= 0.0)) {
    bad_config("mu_scale and outcome_noise_sd must be non-negative");
  }
  const bool bernoulli_cells = c.regime == Regime::HomogeneousDummy || c.regime == Regime::SpilloverDummy ||
                               (c.regime == Regime::HeterogeneousDummy && c.schedule == TreatSchedule::Sparse);
  if (bernoulli_cells && !(c.treat_prob > 0.0 && c.treat_prob < 1.0)) {
    bad_config("treat_prob must lie in (0, 1)");
  }
  switch (c.regime) {
    case Regime::HeterogeneousDummy:
      if (!(c.treat_frac > 0.0 && c.treat_frac < 1.0)) bad_config("treat_frac must lie in (0, 1)");
      if (c.schedule == TreatSchedule::Block &&
          !(c.treated_period_frac > 0.0 && c.treated_period_frac < 1.0)) {
        bad_config("treated_period_frac must lie in (0, 1)");
      }
      break;
    case Regime::GaussianContinuous:
      if (!(c.policy_sd > 0.0)) bad_config("policy_sd must be positive");
      break;
    case Regime::NonNegativeContinuous:
      if (!(c.zero_prob >= 0.0 && c.zero_prob < 1.0)) bad_config("zero_prob must lie in [0, 1)");
      if (!(c.d_lower > 0.0 && c.d_lower <= c.d_upper)) bad_config("need 0 < d_lower <= d_upper");
      break;
    case Regime::SpilloverDummy:
      if (c.adjacency.size() != 0 &&
          (c.adjacency.rows() != idx(c.n_units) || c.adjacency.cols() != idx(c.n_units))) {
        bad_config("adjacency must be n_units x n_units");
      }
      break;
    case Regime::HomogeneousDummy:
      break;
  }
  if (!is_dummy(c.regime) && c.grid_points < 3) bad_config("grid_points must be at least 3");
}

void apply_setting(ScenarioConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  auto size = [&] { return static_cast<std::size_t>(parse_unsigned(key, value)); };
  auto real = [&] { return parse_double(key, value); };
  if (key == "regime") c.regime = parse_regime(value);
  else if (key == "n_units") c.n_units = size();
  else if (key == "n_times") c.n_times = size();
  else if (key == "burn_in") c.burn_in = size();
  else if (key == "phi") c.phi = parse_phi(value);
  else if (key == "mu_scale") c.mu_scale = real();
  else if (key == "impact") {
    if (value == "linear") c.impact.kind = ImpactFunction::Kind::Linear;
    else if (value == "quadratic") c.impact.kind = ImpactFunction::Kind::Quadratic;
    else if (value == "step") c.impact.kind = ImpactFunction::Kind::Step;
    else bad_config("impact must be linear, quadratic or step");
  }
  else if (key == "impact_a") c.impact.a = real();
  else if (key == "impact_b") c.impact.b = real();
  else if (key == "outcome_noise_sd") c.outcome_noise_sd = real();
  else if (key == "treat_prob") c.treat_prob = real();
  else if (key == "treat_frac") c.treat_frac = real();
  else if (key == "schedule") {
    if (value == "sparse") c.schedule = TreatSchedule::Sparse;
    else if (value == "block") c.schedule = TreatSchedule::Block;
    else bad_config("schedule must be sparse or block");
  }
  else if (key == "treated_period_frac") c.treated_period_frac = real();
  else if (key == "policy_sd") c.policy_sd = real();
  else if (key == "zero_prob") c.zero_prob = real();
  else if (key == "d_lower") c.d_lower = real();
  else if (key == "d_upper") c.d_upper = real();
  else if (key == "selection_gain") c.selection_gain = real();
  else if (key == "anticipation_shift") c.anticipation_shift = real();
  else if (key == "spillover_rho") c.spillover_rho = real();
  else if (key == "exposure_mode") {
    try {
      c.exposure_mode = parse_exposure_mode(value);
    } catch (const Error&) {
      bad_config("exposure_mode must be treated_neighbor_share or binary_any_neighbor");
    }
  }
  else if (key == "grid_points") c.grid_points = size();
  else if (key == "seed") c.seed = parse_unsigned(key, value);
  else bad_config("unknown setting '" + std::string(key) + "'");
}

ScenarioConfig parse_scenario_config(std::istream& in) {
  ScenarioConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      bad_config("line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      apply_setting(config, view.substr(0, eq), view.substr(eq + 1));
    } catch (const Error& e) {
      bad_config("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

double PotentialOutcomePanel::potential(std::size_t cell, double dose) const {
  const auto c = idx(cell);
  double out = truth.impact(dose) + truth.selection_gain * gain_score(c) * dose + base(c);
  if (exposure.size() != 0) out += truth.spillover_rho * exposure(c) * (1.0 - dose);
  return out;
}

Simulation simulate_scenario(const ScenarioConfig& config) {
  validate_config(config);
  const std::size_t n = config.n_units;
  const std::size_t t_count = config.n_times;
  const std::size_t cells = n * t_count;
  Rng rng = make_rng(config.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  MatrixXd mu(idx(n), 2);
  for (Index i = 0; i < mu.rows(); ++i) {
    for (Index v = 0; v < 2; ++v) mu(i, v) = config.mu_scale * normal(rng);
  }

  PotentialOutcomePanel pop;
  pop.truth = config;
  pop.n_units = n;
  pop.n_times = t_count;
  pop.assignment = VectorXd::Zero(idx(cells));
  pop.base = VectorXd::Zero(idx(cells));
  pop.gain_score = VectorXd::Zero(idx(cells));
  pop.unit_in_treated_group.assign(n, 0);
  pop.period_in_treated_group.assign(t_count, 0);

  for (std::size_t c = 0; c < cells; ++c) pop.base(idx(c)) = config.outcome_noise_sd * normal(rng);

  auto cell = [&](std::size_t i, std::size_t t) { return idx(i * t_count + t); };

  switch (config.regime) {
    case Regime::HomogeneousDummy: {
      std::fill(pop.unit_in_treated_group.begin(), pop.unit_in_treated_group.end(), 1);
      for (std::size_t t = 0; t < t_count; ++t) {
        const double d = unit(rng) < config.treat_prob ? 1.0 : 0.0;
        pop.period_in_treated_group[t] = static_cast<char>(d > 0.0);
        for (std::size_t i = 0; i < n; ++i) pop.assignment(cell(i, t)) = d;
      }
      pop.gain_score = pop.assignment;
      break;
    }
    case Regime::GaussianContinuous: {
      for (std::size_t c = 0; c < cells; ++c) {
        const double z = normal(rng);
        pop.assignment(idx(c)) = config.policy_sd * z;
        pop.gain_score(idx(c)) = z * z - 1.0;
      }
      std::fill(pop.unit_in_treated_group.begin(), pop.unit_in_treated_group.end(), 1);
      std::fill(pop.period_in_treated_group.begin(), pop.period_in_treated_group.end(), 1);
      break;
    }
    case Regime::NonNegativeContinuous: {
      const double width = config.d_upper - config.d_lower;
      const double pos = 1.0 - config.zero_prob;
      const double mean = pos * 0.5 * (config.d_lower + config.d_upper);
      const double second = pos * (config.d_lower * config.d_lower + config.d_lower * config.d_upper +
                                   config.d_upper * config.d_upper) / 3.0;
      const double sd = std::sqrt(std::max(second - mean * mean, 0.0));
      for (std::size_t c = 0; c < cells; ++c) {
        const bool positive = unit(rng) >= config.zero_prob;
        const double u = unit(rng);
        const double w = positive ? config.d_lower + width * u : 0.0;
        pop.assignment(idx(c)) = w;
        const double z = sd > 0.0 ? (w - mean) / sd : 0.0;
        pop.gain_score(idx(c)) = z * z - 1.0;
      }
      std::fill(pop.unit_in_treated_group.begin(), pop.unit_in_treated_group.end(), 1);
      std::fill(pop.period_in_treated_group.begin(), pop.period_in_treated_group.end(), 1);
      break;
    }
    case Regime::HeterogeneousDummy: {
      const std::size_t eligible = clamp_count(config.treat_frac * static_cast<double>(n), 1, n - 1);
      pop.unit_in_treated_group = random_subset(n, eligible, rng);
      if (config.schedule == TreatSchedule::Block) {
        const std::size_t periods =
            clamp_count(config.treated_period_frac * static_cast<double>(t_count), 1, t_count - 1);
        pop.period_in_treated_group = random_subset(t_count, periods, rng);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t t = 0; t < t_count; ++t) {
            if (pop.unit_in_treated_group[i] && pop.period_in_treated_group[t]) pop.assignment(cell(i, t)) = 1.0;
          }
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t t = 0; t < t_count; ++t) {
            const bool draw = unit(rng) < config.treat_prob;
            if (pop.unit_in_treated_group[i] && draw) {
              pop.assignment(cell(i, t)) = 1.0;
              pop.period_in_treated_group[t] = 1;
            }
          }
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!pop.unit_in_treated_group[i]) continue;
        for (std::size_t t = 0; t < t_count; ++t) {
          if (pop.assignment(cell(i, t)) == 0.0) pop.base(cell(i, t)) += config.anticipation_shift;
        }
      }
      pop.gain_score = pop.assignment;
      break;
    }
    case Regime::SpilloverDummy: {
      MatrixXd treatment(idx(n), idx(t_count));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < t_count; ++t) {
          const double d = unit(rng) < config.treat_prob ? 1.0 : 0.0;
          treatment(idx(i), idx(t)) = d;
          pop.assignment(cell(i, t)) = d;
          if (d > 0.0) pop.period_in_treated_group[t] = 1;
        }
      }
      std::fill(pop.unit_in_treated_group.begin(), pop.unit_in_treated_group.end(), 1);
      const MatrixXd adjacency = config.adjacency.size() != 0 ? config.adjacency : ring_adjacency(n);
      const ExposureMap map = build_exposure(adjacency, treatment, config.exposure_mode);
      pop.exposure.resize(idx(cells));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < t_count; ++t) pop.exposure(cell(i, t)) = map.s_values(idx(i), idx(t));
      }
      pop.gain_score = pop.assignment;
      break;
    }
  }

  if (is_dummy(config.regime)) {
    pop.grid = {0.0, 1.0};
  } else if (config.regime == Regime::GaussianContinuous) {
    pop.grid = linspace(-6.0 * config.policy_sd, 6.0 * config.policy_sd, config.grid_points);
  } else {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Index c = 0; c < pop.assignment.size(); ++c) {
      const double w = pop.assignment(c);
      if (w > 0.0) {
        lo = std::min(lo, w);
        hi = std::max(hi, w);
      }
    }
    if (!std::isfinite(lo)) throw Error(ErrorCode::AllZeros, "no positive dose was drawn");
    pop.zero_atom = true;
    pop.d_lower = lo;
    pop.d_upper = hi;
    pop.grid.push_back(0.0);
    const auto positive = linspace(lo, hi, lo < hi ? config.grid_points : 1);
    pop.grid.insert(pop.grid.end(), positive.begin(), positive.end());
  }

  pop.outcome.resize(idx(cells));
  pop.po_grid.resize(idx(cells), idx(pop.grid.size()));
  for (std::size_t c = 0; c < cells; ++c) {
    pop.outcome(idx(c)) = pop.potential(c, pop.assignment(idx(c)));
    for (std::size_t b = 0; b < pop.grid.size(); ++b) pop.po_grid(idx(c), idx(b)) = pop.potential(c, pop.grid[b]);
  }
  if (config.regime == Regime::SpilloverDummy) {
    pop.po_exposure.resize(idx(cells), 4);
    for (std::size_t c = 0; c < cells; ++c) {
      const auto r = idx(c);
      const double zero = config.impact(0.0) + pop.base(r);
      const double one = config.impact(1.0) + config.selection_gain * pop.gain_score(r) + pop.base(r);
      pop.po_exposure(r, 0) = zero;
      pop.po_exposure(r, 1) = zero + config.spillover_rho * pop.exposure(r);
      pop.po_exposure(r, 2) = one;
      pop.po_exposure(r, 3) = one;
    }
  }

  MatrixXd innovations(idx(cells), 2);
  innovations.col(0) = pop.assignment;
  innovations.col(1) = pop.outcome;
  const MatrixXd burn_chol = MatrixXd::Identity(2, 2);
  Simulation out;
  out.panel.n_units = n;
  out.panel.n_times = t_count;
  out.panel.n_policies = 1;
  out.panel.n_outcomes = 1;
  out.panel.variable_names = {"W", "Y"};
  out.panel.values = propagate(config.phi, mu, innovations, n, t_count, config.burn_in, burn_chol, rng);
  out.panel = validate_panel(std::move(out.panel));
  out.truth = std::move(pop);
  return out;
}

PanelDataset simulate_pvar(const VarDgp& dgp) {
  const Index m = dgp.sigma.rows();
  if (m < 2 || dgp.sigma.cols() != m) throw Error(ErrorCode::BadConfig, "sigma must be square with m >= 2");
  if (dgp.phi.empty()) throw Error(ErrorCode::BadConfig, "phi needs at least one lag");
  for (const auto& block : dgp.phi) {
    if (block.rows() != m || block.cols() != m) throw Error(ErrorCode::BadConfig, "phi blocks must be m x m");
  }
  if (dgp.n_policies >= static_cast<std::size_t>(m)) throw Error(ErrorCode::BadConfig, "need at least one outcome");
  Eigen::LLT<MatrixXd> llt(dgp.sigma);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::BadConfig, "sigma must be positive definite");
  const MatrixXd chol = llt.matrixL();

  Rng rng = make_rng(dgp.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd mu(idx(dgp.n_units), m);
  for (Index i = 0; i < mu.rows(); ++i) {
    for (Index v = 0; v < m; ++v) mu(i, v) = dgp.mu_scale * normal(rng);
  }
  const std::size_t cells = dgp.n_units * dgp.n_times;
  MatrixXd innovations(idx(cells), m);
  for (std::size_t c = 0; c < cells; ++c) {
    VectorXd z(m);
    for (Index v = 0; v < m; ++v) z(v) = normal(rng);
    innovations.row(idx(c)) = (chol * z).transpose();
  }
  PanelDataset panel;
  panel.n_units = dgp.n_units;
  panel.n_times = dgp.n_times;
  panel.n_policies = dgp.n_policies;
  panel.n_outcomes = static_cast<std::size_t>(m) - dgp.n_policies;
  panel.values = propagate(dgp.phi, mu, innovations, dgp.n_units, dgp.n_times, dgp.burn_in, chol, rng);
  return validate_panel(std::move(panel));
}

}  // namespace causal_pvar
