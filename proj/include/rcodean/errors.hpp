#pragma once

#include <stdexcept>

namespace rcodean {

/// Invalid model or run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data outside the accepted domain (for example an image too small
/// to resample).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was invoked on an object that is not ready for it, such as
/// scoring with an untrained model.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace rcodean
