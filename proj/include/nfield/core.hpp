#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nfield {

/// Invalid or inconsistent user input (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to meet its contract (exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (e.g. negative variance).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Time integration produced a non-finite or unusable state.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, double t, std::size_t index)
      : NumericalError(what + " (t=" + std::to_string(t) + ", index=" + std::to_string(index) + ")"),
        t_(t),
        index_(index) {}

  double time() const { return t_; }
  std::size_t index() const { return index_; }

 private:
  double t_;
  std::size_t index_;
};

/// Newton or bracketing solver did not converge.
class RootFindError : public NumericalError {
 public:
  RootFindError(const std::string& what, double last_iterate)
      : NumericalError(what), last_(last_iterate) {}
  double last_iterate() const { return last_; }

 private:
  double last_;
};

inline constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace nfield
