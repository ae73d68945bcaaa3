#ifndef ABPO_ERROR_H_
#define ABPO_ERROR_H_

#include <stdexcept>
#include <string>

namespace abpo {

// Bad hyperparameters, shape mismatches, or an unsatisfiable request
// (e.g. a distractor pool too small for the candidate set size).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An action that is not a member of the candidate set it is scored against.
class InvalidActionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value that parsed but violates a domain invariant (propensity outside
// (0,1], label inconsistent with the latent positive, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Non-finite loss or gradient during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace abpo

#endif  // ABPO_ERROR_H_
