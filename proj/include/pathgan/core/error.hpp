#pragma once

#include <stdexcept>
#include <string>

namespace pathgan {

/// Invalid caller input (empty batch, out-of-range index, bad rating, ...).
class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent model/training/extractor configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Corrupt, truncated or mismatched on-disk artifact.
class IntegrityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise unusable numerical result.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A requested backend (e.g. a pretrained feature network) is not available.
class CapabilityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Lookup of an unknown identifier (atlas id, session id, ...).
class NotFoundError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operation not allowed in the current state (e.g. re-rating a study item).
class StateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace pathgan
