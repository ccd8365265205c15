// granalign/error.h
//
// Single exception type used across the toolkit. The kind drives the CLI
// exit-code taxonomy (validation -> 1, data -> 2).

#ifndef GRANALIGN_ERROR_H_
#define GRANALIGN_ERROR_H_

#include <stdexcept>
#include <string>

namespace granalign {

enum class ErrorKind {
  kEmptyInput,
  kPrecondition,
  kInfeasible,
  kVocabulary,
  kConsistency,
  kNumeric,
  kData,
  kInsufficientSeeds,
  kUndefinedMetric,
};

const char *ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  // True for errors caused by the content of input files rather than by
  // arguments or preconditions.
  bool is_data_error() const { return kind_ == ErrorKind::kData; }

 private:
  ErrorKind kind_;
};

inline const char *ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kPrecondition: return "precondition violated";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kVocabulary: return "unknown symbol";
    case ErrorKind::kConsistency: return "inconsistent input";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kInsufficientSeeds: return "insufficient seeds";
    case ErrorKind::kUndefinedMetric: return "undefined metric";
  }
  return "error";
}

}  // namespace granalign

#endif  // GRANALIGN_ERROR_H_
