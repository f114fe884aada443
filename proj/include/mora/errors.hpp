#pragma once

#include <stdexcept>
#include <string>

namespace mora {

// Bad experiment configuration, unknown context ids, unreadable files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A cell has no valid trials, or a metric is missing a required aggregate.
struct NoDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Replay fixture has no record for a requested key.
struct FixtureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A live call failed after all retry attempts (or was not retryable).
struct TransportError : std::runtime_error {
  TransportError(const std::string& what, int attempts_used)
      : std::runtime_error(what), attempts(attempts_used) {}
  int attempts = 0;
};

// The rate gate was shut down while a caller was waiting.
struct CancelledError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mora
