#pragma once

#include <stdexcept>
#include <string>

namespace evprof {

enum class ErrorKind {
  parse,
  config,
  parameter,
  selection,
  training,
  prediction,
  split,
  balance,
  subsample,
  distribution,
  aggregation,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse error";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::selection: return "selection error";
    case ErrorKind::training: return "training error";
    case ErrorKind::prediction: return "prediction error";
    case ErrorKind::split: return "split error";
    case ErrorKind::balance: return "balance error";
    case ErrorKind::subsample: return "subsample error";
    case ErrorKind::distribution: return "distribution error";
    case ErrorKind::aggregation: return "aggregation error";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

// Domain error. The CLI maps every Error to exit code 1.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace evprof
