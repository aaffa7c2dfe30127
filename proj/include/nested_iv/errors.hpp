#pragma once

#include <stdexcept>
#include <string>

namespace niv {

enum class ErrorCode {
  InvalidArgument = 1,
  Io,
  MissingColumn,
  UnparseableValue,
  EmptyFile,
  SchemaMismatch,
  SingularCovariance,
  EmptyArm,
  InfeasibleStrataCount,
  Infeasible,
  TooFewStrata,
  UndefinedEstimand,
  GammaBelowOne,
  InvalidConfig,
  TooLargeForEnumeration,
  InvalidDesign,
  Internal
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace niv
