#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace causal_pvar {

enum class ErrorCode {
  UnbalancedPanel,
  NonFinite,
  BadOrdering,
  DegenerateDummy,
  SingularDesign,
  InsufficientObs,
  InvalidSpec,
  NotPSD,
  ZeroPolicyVariance,
  BootstrapUnstable,
  BadConfig,
  EmptyTreatedSet,
  DegenerateAssignment,
  GridTooNarrow,
  AllZeros,
  GridMismatch,
  EmptyCell,
  RegimeMismatch,
  AsymmetricAdjacency,
  SelfLoop,
  CollinearRegressors,
  NoTreatedCells,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is reported as an Error carrying
// one of the codes above; the CLI maps them to exit status 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace causal_pvar
