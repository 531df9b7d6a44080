#pragma once

#include <stdexcept>
#include <string>

namespace dpb {

// Invalid argument to a pure formula (probability outside [0,1], negative KL, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class DataErrorKind {
  BadMagic,
  Truncated,
  CountMismatch,
  Format,
  Io,
};

class DataError : public std::runtime_error {
public:
  DataError(DataErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  DataErrorKind kind() const noexcept { return kind_; }

private:
  DataErrorKind kind_;
};

// A Langevin chain produced a non-finite gradient or iterate.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace dpb
