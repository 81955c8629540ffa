#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vqa {

enum class ErrorCode {
  InvalidArgument,
  IoFailure,
  UnsupportedDatatype,
  BadMagic,
  TruncatedFile,
  DimOverflow,
  DegenerateIntensityRange,
  TargetSmallerThanSource,
  DimMismatch,
  GeometryMismatch,
  EmptyReference,
  DegenerateMarginals,
  EmptyBrainMask,
  NonFiniteField,
  AllRegistrationsFailed,
  MissingGeneralQuality,
  TooFewPairs,
  EmptyList,
  NoSubjectsPass,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vqa
