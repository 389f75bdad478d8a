#include "causal_pvar_cli/commands.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <string_view>

#include "causal_pvar/causal_lab.hpp"
#include "causal_pvar/diagnostics.hpp"
#include "causal_pvar/error.hpp"
#include "causal_pvar/estimands.hpp"
#include "causal_pvar/identify.hpp"
#include "causal_pvar/spillover.hpp"
#include "causal_pvar/verify.hpp"

namespace causal_pvar::cli {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

std::string extension(Format format) { return format == Format::Csv ? "csv" : "jsonl"; }

std::string artifact(const RunConfig& config, const std::string& suffix) {
  return config.output + "." + suffix + "." + extension(config.format);
}

void require_input(const RunConfig& config) {
  if (config.input.empty()) throw UsageError(config.command + " needs --input");
}

std::string bool_text(bool v) { return v ? "true" : "false"; }

std::optional<std::uint64_t> parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

// Applies a scenario file and --set overrides on top of `base`. Returns the
// seed if one was given in either place.
std::optional<std::uint64_t> apply_scenario(ScenarioConfig& base, const RunConfig& config) {
  std::optional<std::uint64_t> seed;
  auto apply = [&](std::string_view line, const std::string& where) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::BadConfig, where + ": expected key=value");
    try {
      apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::BadConfig, where + ": " + e.what());
    }
    if (line.substr(0, eq).find("seed") != std::string_view::npos) seed = base.seed;
  };
  if (!config.config_path.empty()) {
    std::ifstream in(config.config_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + config.config_path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) apply(line, config.config_path + ":" + std::to_string(++line_no));
  }
  for (const auto& s : config.settings) apply(s, "--set " + s);
  return seed;
}

PanelDataset load(const RunConfig& config) {
  require_input(config);
  return load_panel_csv(config.input, config.policies);
}

PVARFit fit_from(const RunConfig& config, const PanelDataset& panel) {
  PVARSpec spec;
  spec.lag_order = config.lags;
  return fit_pvar(panel, spec);
}

std::size_t shock_index(const RunConfig& config, const PanelDataset& panel) {
  if (config.shock < 1 || config.shock > panel.n_vars()) throw UsageError("--shock is out of range (1-based)");
  return config.shock - 1;
}

void cmd_simulate(const RunConfig& config, std::ostream& log) {
  ScenarioConfig scenario;
  const auto file_seed = apply_scenario(scenario, config);
  scenario.seed = resolve_seed(config.seed, file_seed);
  const Simulation sim = simulate_scenario(scenario);
  const PotentialOutcomePanel& pop = sim.truth;
  write_panel_csv(sim.panel, config.output);

  ResultTable truth;
  truth.columns = {"unit", "time", "assignment", "outcome_innovation"};
  const bool spill = pop.exposure.size() != 0;
  if (spill) truth.columns.push_back("exposure");
  truth.columns.push_back("unit_group");
  truth.columns.push_back("period_group");
  for (std::size_t i = 0; i < pop.n_units; ++i) {
    for (std::size_t t = 0; t < pop.n_times; ++t) {
      const Index c = idx(i * pop.n_times + t);
      std::vector<Cell> row{static_cast<long long>(sim.panel.unit_ids[i]),
                            static_cast<long long>(sim.panel.time_ids[t]), pop.assignment(c), pop.outcome(c)};
      if (spill) row.emplace_back(pop.exposure(c));
      row.emplace_back(static_cast<long long>(pop.unit_in_treated_group[i]));
      row.emplace_back(static_cast<long long>(pop.period_in_treated_group[t]));
      truth.rows.push_back(std::move(row));
    }
  }
  write_results(truth, artifact(config, "truth"), config.format);

  const EstimandReport est = oracle_estimands(pop);
  ResultTable summary;
  summary.columns = {"estimand", "value", "mc_se"};
  auto add = [&](const char* name, double value, double se) {
    if (std::isfinite(value)) summary.rows.push_back({std::string(name), value, se});
  };
  add("ate", est.ate, est.mc_se.ate);
  add("att", est.att, est.mc_se.att);
  add("selection_bias", est.selection_bias, est.mc_se.selection_bias);
  add("ate_at_d_lower", est.ate_at_dl, est.mc_se.ate_at_dl);
  if (spill) {
    const ExposureEffects effects = oracle_atte_aste(pop);
    add("atte", effects.atte, 0.0);
    add("aste", effects.aste, 0.0);
  }
  write_results(summary, artifact(config, "estimands"), config.format);
  log << "simulate: regime=" << to_string(scenario.regime) << " N=" << scenario.n_units
      << " T=" << scenario.n_times << " seed=" << scenario.seed << '\n';
}

void cmd_fit(const RunConfig& config, std::ostream& log) {
  const PanelDataset panel = load(config);
  const PVARFit fit = fit_from(config, panel);
  const auto& names = panel.variable_names;
  const std::size_t m = panel.n_vars();

  ResultTable coef;
  coef.columns = {"equation", "regressor", "lag", "estimate"};
  for (std::size_t l = 0; l < fit.phi.size(); ++l) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t r = 0; r < m; ++r) {
        coef.rows.push_back({names[j], names[r], static_cast<long long>(l + 1), fit.phi[l](idx(j), idx(r))});
      }
    }
  }
  write_results(coef, config.output, config.format);

  ResultTable sigma;
  sigma.columns = {"row", "column", "value"};
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t r = 0; r < m; ++r) sigma.rows.push_back({names[j], names[r], fit.sigma(idx(j), idx(r))});
  }
  write_results(sigma, artifact(config, "sigma"), config.format);

  ResultTable effects;
  effects.columns = {"unit", "variable", "intercept", "mu"};
  for (std::size_t i = 0; i < panel.n_units; ++i) {
    for (std::size_t v = 0; v < m; ++v) {
      effects.rows.push_back({static_cast<long long>(panel.unit_ids[i]), names[v], fit.intercept(idx(i), idx(v)),
                              fit.mu(idx(i), idx(v))});
    }
  }
  write_results(effects, artifact(config, "effects"), config.format);

  ResultTable resid;
  resid.columns = {"unit", "time"};
  resid.columns.insert(resid.columns.end(), names.begin(), names.end());
  for (std::size_t i = 0; i < panel.n_units; ++i) {
    for (std::size_t t = fit.first_period; t < panel.n_times; ++t) {
      std::vector<Cell> row{static_cast<long long>(panel.unit_ids[i]), static_cast<long long>(panel.time_ids[t])};
      for (std::size_t v = 0; v < m; ++v) row.emplace_back(fit.residuals(idx(fit.residual_row(i, t)), idx(v)));
      resid.rows.push_back(std::move(row));
    }
  }
  write_results(resid, artifact(config, "residuals"), config.format);
  log << "fit: N=" << panel.n_units << " T=" << panel.n_times << " m=" << m << " p=" << config.lags
      << " effective_obs=" << fit.effective_obs << '\n';
}

void cmd_irf(const RunConfig& config, std::ostream& log) {
  const PanelDataset panel = load(config);
  PVARSpec spec;
  spec.lag_order = config.lags;
  const std::size_t k = shock_index(config, panel);
  ShockNormalization norm = ShockNormalization::UnitShock;
  if (config.normalization == "sd") norm = ShockNormalization::OneStdDev;
  else if (config.normalization != "unit") throw UsageError("--normalization must be unit or sd");
  const std::size_t reps = config.reps.value_or(1000);

  ImpulseResponse point;
  MatrixXd lower;
  MatrixXd upper;
  if (reps > 0) {
    BootstrapOptions options;
    options.reps = reps;
    options.level = config.level;
    options.seed = resolve_seed(config.seed);
    options.normalization = norm;
    options.threads = config.threads;
    BootstrapIrf result = bootstrap_irf(panel, spec, k, config.horizon, options);
    point = std::move(result.point);
    lower = std::move(result.bands.lower);
    upper = std::move(result.bands.upper);
    log << "irf: bootstrap reps=" << reps << " failed=" << result.bands.failed_reps << '\n';
  } else {
    const PVARFit fit = fit_pvar(panel, spec);
    point = irf(fit, cholesky_lower(fit.sigma), k, config.horizon, norm);
    lower = upper = MatrixXd::Constant(point.responses.rows(), point.responses.cols(),
                                       std::numeric_limits<double>::quiet_NaN());
  }
  ResultTable table;
  table.columns = {"variable", "horizon", "point", "lower", "upper"};
  for (std::size_t v = 0; v < panel.n_vars(); ++v) {
    for (std::size_t h = 0; h <= config.horizon; ++h) {
      table.rows.push_back({panel.variable_names[v], static_cast<long long>(h), point.responses(idx(v), idx(h)),
                            lower(idx(v), idx(h)), upper(idx(v), idx(h))});
    }
  }
  write_results(table, config.output, config.format);
}

void cmd_lagselect(const RunConfig& config, std::ostream& log) {
  const PanelDataset panel = load(config);
  const LagSelectionTable lags = lag_criteria(panel, config.max_lags);
  ResultTable table;
  table.columns = {"p", "mbic_like", "maic_like", "mqic_like"};
  for (const auto& row : lags.rows) {
    table.rows.push_back({static_cast<long long>(row.lag_order), row.mbic_like, row.maic_like, row.mqic_like});
  }
  write_results(table, config.output, config.format);
  log << "lagselect: chosen mbic_like=" << lags.chosen_mbic << " maic_like=" << lags.chosen_maic
      << " mqic_like=" << lags.chosen_mqic << '\n';
}

void cmd_diagnose(const RunConfig& config, std::ostream& log) {
  const PanelDataset panel = load(config);
  const PVARFit fit = fit_from(config, panel);
  const DiagnosticsReport report = diagnose(fit, panel.n_policies, config.autocorr_lags);
  const auto& names = panel.variable_names;

  ResultTable corr;
  corr.columns = {"lag", "variable", "lagged_variable", "corr"};
  for (std::size_t s = 0; s < report.autocorr.corr.size(); ++s) {
    for (std::size_t j = 0; j < panel.n_vars(); ++j) {
      for (std::size_t l = 0; l < panel.n_vars(); ++l) {
        corr.rows.push_back({static_cast<long long>(s + 1), names[j], names[l], report.autocorr.corr[s](idx(j), idx(l))});
      }
    }
  }
  write_results(corr, config.output, config.format);

  ResultTable summary;
  summary.columns = {"metric", "value"};
  summary.rows.push_back({std::string("autocorr_bound"), report.autocorr.bound});
  summary.rows.push_back({std::string("max_abs_autocorr"), report.autocorr.max_abs_corr});
  summary.rows.push_back({std::string("autocorr_violated"), static_cast<long long>(report.autocorr.violated)});
  summary.rows.push_back({std::string("spectral_radius"), report.stationarity.spectral_radius});
  summary.rows.push_back({std::string("stationary"), static_cast<long long>(report.stationarity.stationary)});
  summary.rows.push_back({std::string("radius_converged"), static_cast<long long>(report.stationarity.converged)});
  write_results(summary, artifact(config, "summary"), config.format);

  ResultTable probes;
  probes.columns = {"variable", "n", "is_binary", "share_zero", "skewness", "excess_kurtosis", "normality_stat"};
  for (std::size_t k = 0; k < report.policy_probes.size(); ++k) {
    const PolicyProbe& p = report.policy_probes[k];
    probes.rows.push_back({names[k], static_cast<long long>(p.n), static_cast<long long>(p.is_binary), p.share_zero,
                           p.skewness, p.excess_kurtosis, p.normality_stat});
  }
  write_results(probes, artifact(config, "probe"), config.format);
  log << "diagnose: spectral_radius=" << format_double(report.stationarity.spectral_radius)
      << " autocorr_violated=" << bool_text(report.autocorr.violated) << '\n';
}

void cmd_spillover(const RunConfig& config, std::ostream& log) {
  const PanelDataset panel = load(config);
  if (config.adjacency.empty()) throw UsageError("spillover needs --adjacency");
  const std::size_t k = shock_index(config, panel);
  if (k >= panel.n_policies) throw UsageError("--shock must name a policy variable");
  const std::size_t j = config.outcome.value_or(panel.n_policies + 1);
  if (j < 1 || j > panel.n_vars() || j - 1 < panel.n_policies) throw UsageError("--outcome must name an outcome variable");
  const ExposureMode mode = parse_exposure_mode(config.mode);
  const PVARFit fit = fit_from(config, panel);

  MatrixXd treatment(idx(panel.n_units), idx(panel.n_times));
  if (!config.treatment.empty()) {
    treatment = load_cell_indicator(config.treatment, panel);
  } else {
    for (std::size_t i = 0; i < panel.n_units; ++i) {
      for (std::size_t t = 0; t < panel.n_times; ++t) treatment(idx(i), idx(t)) = panel.at(i, t, k) != 0.0 ? 1.0 : 0.0;
    }
  }
  const MatrixXd adjacency = load_edge_list(config.adjacency, panel.unit_ids);
  const ExposureMap map = build_exposure(adjacency, treatment, mode);
  const std::size_t per = fit.periods_per_unit();
  VectorXd s(idx(panel.n_units * per));
  for (std::size_t i = 0; i < panel.n_units; ++i) {
    for (std::size_t t = fit.first_period; t < panel.n_times; ++t) {
      s(idx(fit.residual_row(i, t))) = map.s_values(idx(i), idx(t)) * (1.0 - treatment(idx(i), idx(t)));
    }
    auto seg = s.segment(idx(i * per), idx(per));
    seg.array() -= seg.mean();
  }
  SpilloverOptions options;
  options.reps = config.reps.value_or(1000);
  options.seed = options.reps > 0 ? resolve_seed(config.seed) : 0;
  options.threads = config.threads;
  const SpilloverFit result =
      spillover_regression(fit.residuals.col(idx(k)), fit.residuals.col(idx(j - 1)), s, options);

  ResultTable table;
  table.columns = {"term", "estimate", "se"};
  table.rows.push_back({panel.variable_names[k], result.delta, result.se_delta});
  table.rows.push_back({std::string("spillover_exposure"), result.rho, result.se_rho});
  write_results(table, config.output, config.format);
  log << "spillover: mode=" << to_string(mode) << " reps=" << result.n_reps
      << " exposure_degenerate=" << bool_text(result.exposure_degenerate)
      << " recentred=" << bool_text(result.recentred) << '\n';
}

void cmd_verify(const RunConfig& config, std::ostream& log) {
  if (config.theorem.empty()) throw UsageError("verify needs --theorem (T1..T7, T9, T10 or interference)");
  const bool interference = config.theorem == "interference";
  std::optional<Theorem> theorem;
  if (!interference) theorem = parse_theorem(config.theorem);
  ScenarioConfig scenario = interference ? default_interference_scenario() : default_scenario(*theorem);
  const auto file_seed = apply_scenario(scenario, config);
  scenario.seed = resolve_seed(config.seed, file_seed);
  const std::size_t reps = config.reps.value_or(200);
  const VerificationReport report =
      interference ? verify_interference(scenario, reps, parse_exposure_mode(config.mode), config.threads)
                   : verify_theorem(*theorem, scenario, reps, config.threads);

  ResultTable table;
  table.columns = {"theorem", "check", "mean_estimate", "mean_target", "discrepancy", "mc_se", "tolerance",
                   "pass", "asserted"};
  for (const auto& c : report.checks) {
    table.rows.push_back({report.theorem, c.name, c.mean_estimate, c.mean_target, c.discrepancy, c.mc_se,
                          c.tolerance, bool_text(c.pass), bool_text(c.asserted)});
  }
  write_results(table, config.output, config.format);
  log << "verify: " << report.theorem << " reps=" << reps << " passed=" << bool_text(report.passed()) << '\n';
}

}  // namespace

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const std::optional<std::uint64_t>& from_config) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  if (const char* env = std::getenv("CAUSAL_PVAR_SEED")) {
    if (const auto v = parse_u64(env)) return *v;
    throw UsageError("CAUSAL_PVAR_SEED is not a non-negative integer");
  }
  throw UsageError("a seed is required: pass --seed or set CAUSAL_PVAR_SEED");
}

void run(const RunConfig& config, std::ostream& log) {
  if (config.output.empty()) throw UsageError("--output is required");
  if (config.threads == 0) throw UsageError("--threads must be at least 1");
  if (config.command == "simulate") cmd_simulate(config, log);
  else if (config.command == "fit") cmd_fit(config, log);
  else if (config.command == "irf") cmd_irf(config, log);
  else if (config.command == "lagselect") cmd_lagselect(config, log);
  else if (config.command == "diagnose") cmd_diagnose(config, log);
  else if (config.command == "spillover") cmd_spillover(config, log);
  else if (config.command == "verify") cmd_verify(config, log);
  else throw UsageError("unknown command '" + config.command + "'");
}

}  // namespace causal_pvar::cli
