#pragma once

#include <stdexcept>
#include <string>

namespace demoq {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidDimensions : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct InvalidUP : Error { using Error::Error; };
struct InvalidDelta : Error { using Error::Error; };
struct SingularGram : Error { using Error::Error; };
struct SolverFailure : Error { using Error::Error; };
struct NonContracting : Error { using Error::Error; };
struct MissingParams : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct BudgetTooSmall : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct HeaderMismatch : Error { using Error::Error; };
struct CorruptPayload : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };
struct InvalidStepSize : Error { using Error::Error; };
struct InvalidDomain : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace demoq
