#include "nested_iv/errors.hpp"

namespace niv {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnparseableValue: return "UnparseableValue";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::EmptyArm: return "EmptyArm";
    case ErrorCode::InfeasibleStrataCount: return "InfeasibleStrataCount";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::TooFewStrata: return "TooFewStrata";
    case ErrorCode::UndefinedEstimand: return "UndefinedEstimand";
    case ErrorCode::GammaBelowOne: return "GammaBelowOne";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TooLargeForEnumeration: return "TooLargeForEnumeration";
    case ErrorCode::InvalidDesign: return "InvalidDesign";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace niv
