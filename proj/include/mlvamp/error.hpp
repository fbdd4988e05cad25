#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mlvamp {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or malformed input document. The CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A numerical routine could not produce a trustworthy answer. `diagnostics()` carries
// the arguments and intermediate values needed to reproduce the failure.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::string diagnostics)
      : Error(what + (diagnostics.empty() ? "" : " [" + diagnostics + "]")),
        diagnostics_(std::move(diagnostics)) {}
  explicit NumericalError(const std::string& what) : Error(what) {}

  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

// An iterative optimizer or sampler left the finite region; `trace()` holds the losses so far.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::vector<double> trace)
      : NumericalError(what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace mlvamp
