#pragma once

#include <stdexcept>
#include <string>

namespace fricmot {

enum class ErrorKind {
  Domain,
  Ordering,
  Arbitrage,
  Infeasible,
  Unbounded,
  UnboundedDisplacement,
  Refusal,
  Convergence,
  MarginalMismatch,
  Config,
  Validation,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace fricmot
