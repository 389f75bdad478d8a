#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "causal_pvar_cli/io.hpp"

namespace causal_pvar::cli {

/// Invalid invocation (missing or contradictory arguments); exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string input;
  std::string output;
  std::string adjacency;
  std::string treatment;
  std::string config_path;
  std::vector<std::string> settings;
  std::size_t lags = 1;
  std::size_t horizon = 10;
  /// Defaults: 1000 for bootstrap commands, 200 for verify.
  std::optional<std::size_t> reps;
  double level = 0.9;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> policies;
  std::size_t shock = 1;
  std::optional<std::size_t> outcome;
  std::size_t max_lags = 4;
  std::size_t autocorr_lags = 4;
  std::string theorem;
  std::string mode = "treated_neighbor_share";
  std::string normalization = "unit";
  unsigned threads = 1;
  Format format = Format::Csv;
};

/// Runs one command and writes its artifacts. Library failures propagate as
/// causal_pvar::Error, invocation problems as UsageError.
void run(const RunConfig& config, std::ostream& log);

/// Resolves the seed from the flag, then a scenario file, then the
/// environment variable CAUSAL_PVAR_SEED; throws UsageError when none is set.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const std::optional<std::uint64_t>& from_config = std::nullopt);

}  // namespace causal_pvar::cli
