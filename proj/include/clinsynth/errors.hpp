#pragma once

#include <stdexcept>
#include <string>

namespace clinsynth {

// Base for everything this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad flags, bad budgets, unknown ids: the caller asked for something invalid.
struct ConfigError : Error {
  using Error::Error;
};

// Broken input files, corrupt corpora, schema violations.
struct DataError : Error {
  using Error::Error;
};

struct GatewayError : Error {
  int status = 0;
  GatewayError(const std::string& msg, int http_status)
      : Error(msg), status(http_status) {}
};

// Retries exhausted; carries the last HTTP status (0 = transport failure).
struct RequestFailed : GatewayError {
  int attempts = 0;
  RequestFailed(const std::string& msg, int last_status, int attempt_count)
      : GatewayError(msg, last_status), attempts(attempt_count) {}
};

// HTTP 400: the request body itself was rejected, retrying cannot help.
struct InvalidRequest : GatewayError {
  explicit InvalidRequest(const std::string& msg) : GatewayError(msg, 400) {}
};

// HTTP 401/403.
struct AuthError : GatewayError {
  AuthError(const std::string& msg, int http_status)
      : GatewayError(msg, http_status) {}
};

}  // namespace clinsynth
