#include "causal_pvar/error.hpp"

namespace causal_pvar {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::BadOrdering: return "BadOrdering";
    case ErrorCode::DegenerateDummy: return "DegenerateDummy";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::InsufficientObs: return "InsufficientObs";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::ZeroPolicyVariance: return "ZeroPolicyVariance";
    case ErrorCode::BootstrapUnstable: return "BootstrapUnstable";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::EmptyTreatedSet: return "EmptyTreatedSet";
    case ErrorCode::DegenerateAssignment: return "DegenerateAssignment";
    case ErrorCode::GridTooNarrow: return "GridTooNarrow";
    case ErrorCode::AllZeros: return "AllZeros";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::RegimeMismatch: return "RegimeMismatch";
    case ErrorCode::AsymmetricAdjacency: return "AsymmetricAdjacency";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::CollinearRegressors: return "CollinearRegressors";
    case ErrorCode::NoTreatedCells: return "NoTreatedCells";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace causal_pvar
