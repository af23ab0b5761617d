#pragma once

#include <stdexcept>
#include <string>

namespace corelw {

enum class ErrorCode {
  config,
  load,
  validation,
  training,
  internal,
  degenerate_kappa,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::config: return "config_error";
    case ErrorCode::load: return "load_error";
    case ErrorCode::validation: return "validation_error";
    case ErrorCode::training: return "training_error";
    case ErrorCode::internal: return "internal_error";
    case ErrorCode::degenerate_kappa: return "degenerate_kappa";
  }
  return "unknown_error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorCode::config, msg) {}
};

struct LoadError : Error {
  explicit LoadError(const std::string& msg) : Error(ErrorCode::load, msg) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(ErrorCode::validation, msg) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& msg) : Error(ErrorCode::training, msg) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& msg) : Error(ErrorCode::internal, msg) {}
};

// Raised when kappa is undefined (all true and predicted labels identical),
// so callers can distinguish "no agreement signal" from a real score.
struct DegenerateKappaError : Error {
  explicit DegenerateKappaError(const std::string& msg)
      : Error(ErrorCode::degenerate_kappa, msg) {}
};

}  // namespace corelw
