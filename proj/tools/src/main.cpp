#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "causal_pvar/error.hpp"
#include "causal_pvar_cli/commands.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

void add_common(CLI::App* cmd, causal_pvar::cli::RunConfig& cfg, std::string& format) {
  cmd->add_option("-o,--output", cfg.output, "Output path (extra artifacts get suffixes)")->required();
  cmd->add_option("--format", format, "csv or jsonl")->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "Worker threads; results do not depend on it")->capture_default_str();
}

void add_panel(CLI::App* cmd, causal_pvar::cli::RunConfig& cfg) {
  cmd->add_option("-i,--input", cfg.input, "Panel CSV")->required();
  cmd->add_option("--policies", cfg.policies, "Number of policy variables (overrides '# policies=K')");
}

}  // namespace

int main(int argc, char** argv) {
  causal_pvar::cli::RunConfig cfg;
  std::string format = "csv";
  std::uint64_t seed = 0;

  CLI::App app{"Panel VAR estimation, recursive identification and causal-estimand verification"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Simulate a panel with known potential outcomes");
  add_common(simulate, cfg, format);
  simulate->add_option("--config", cfg.config_path, "Scenario file of key=value lines");
  simulate->add_option("--set", cfg.settings, "Scenario override key=value (repeatable)");

  auto* fit = app.add_subcommand("fit", "Fixed-effects PVAR estimation");
  add_common(fit, cfg, format);
  add_panel(fit, cfg);
  fit->add_option("--lags", cfg.lags, "Lag order p")->capture_default_str();

  auto* irf = app.add_subcommand("irf", "Impulse responses with bootstrap bands");
  add_common(irf, cfg, format);
  add_panel(irf, cfg);
  irf->add_option("--lags", cfg.lags, "Lag order p")->capture_default_str();
  irf->add_option("--shock", cfg.shock, "Shocked variable (1-based)")->capture_default_str();
  irf->add_option("--horizon", cfg.horizon, "Last horizon H")->capture_default_str();
  irf->add_option("--reps", cfg.reps, "Bootstrap replications (0 disables bands; default 1000)");
  irf->add_option("--level", cfg.level, "Band coverage")->capture_default_str();
  irf->add_option("--normalization", cfg.normalization, "unit or sd")->capture_default_str();

  auto* lagselect = app.add_subcommand("lagselect", "Information criteria for p = 1..pmax");
  add_common(lagselect, cfg, format);
  add_panel(lagselect, cfg);
  lagselect->add_option("--max-lags", cfg.max_lags, "pmax")->capture_default_str();

  auto* diagnose = app.add_subcommand("diagnose", "Residual autocorrelation, stationarity, policy probe");
  add_common(diagnose, cfg, format);
  add_panel(diagnose, cfg);
  diagnose->add_option("--lags", cfg.lags, "Lag order p")->capture_default_str();
  diagnose->add_option("--autocorr-lags", cfg.autocorr_lags, "Largest residual lag s")->capture_default_str();

  auto* spillover = app.add_subcommand("spillover", "Exposure-adjusted impact regression");
  add_common(spillover, cfg, format);
  add_panel(spillover, cfg);
  spillover->add_option("--lags", cfg.lags, "Lag order p")->capture_default_str();
  spillover->add_option("--adjacency", cfg.adjacency, "Edge list of unit_a,unit_b lines")->required();
  spillover->add_option("--treatment", cfg.treatment,
                        "Cell table unit,time,assignment (default: nonzero policy values)");
  spillover->add_option("--mode", cfg.mode, "treated_neighbor_share or binary_any_neighbor")->capture_default_str();
  spillover->add_option("--shock", cfg.shock, "Policy variable (1-based)")->capture_default_str();
  spillover->add_option("--outcome", cfg.outcome, "Outcome variable (1-based; default first outcome)");
  spillover->add_option("--reps", cfg.reps, "Bootstrap replications for standard errors (default 1000)");

  auto* verify = app.add_subcommand("verify", "Monte-Carlo check of an identification result");
  add_common(verify, cfg, format);
  verify->add_option("--theorem", cfg.theorem, "T1..T7, T9, T10 or interference")->required();
  verify->add_option("--config", cfg.config_path, "Scenario file of key=value lines");
  verify->add_option("--set", cfg.settings, "Scenario override key=value (repeatable)");
  verify->add_option("--reps", cfg.reps, "Monte-Carlo replications (default 200)");
  verify->add_option("--mode", cfg.mode, "Exposure mode used for estimation (interference)")->capture_default_str();

  for (auto* cmd : {simulate, irf, spillover, verify}) {
    cmd->add_option("--seed", seed, "Master seed (falls back to CAUSAL_PVAR_SEED)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  for (auto* cmd : app.get_subcommands()) {
    cfg.command = cmd->get_name();
    const auto* opt = cmd->get_option_no_throw("--seed");
    if (opt != nullptr && opt->count() > 0) cfg.seed = seed;
  }

  try {
    cfg.format = causal_pvar::cli::parse_format(format);
  } catch (const causal_pvar::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    causal_pvar::cli::run(cfg, std::cerr);
  } catch (const causal_pvar::cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const causal_pvar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
