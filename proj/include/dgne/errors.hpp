#pragma once

#include <stdexcept>
#include <string>

namespace dgne {

enum class ErrorCategory {
  config,           // bad configuration or malformed input
  contract,         // caller broke a precondition
  assumption,       // a standing assumption does not hold (e.g. no feedback ever arrives)
  calendar,         // corrupt feedback calendar
  game_definition,  // game returned non-finite values
  divergence,       // engine produced a non-finite state
  oracle,           // vGNE solver failed
};

/// Process exit code used by the CLI for each category.
int exit_code(ErrorCategory category);
const char* category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error(ErrorCategory::contract, what) {}
};

class AssumptionViolation : public Error {
 public:
  explicit AssumptionViolation(const std::string& what)
      : Error(ErrorCategory::assumption, what) {}
};

class CalendarError : public Error {
 public:
  explicit CalendarError(const std::string& what) : Error(ErrorCategory::calendar, what) {}
};

class GameDefinitionError : public Error {
 public:
  explicit GameDefinitionError(const std::string& what)
      : Error(ErrorCategory::game_definition, what) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(int round, const std::string& what)
      : Error(ErrorCategory::divergence, what), round_(round) {}
  int round() const noexcept { return round_; }

 private:
  int round_;
};

class OracleError : public Error {
 public:
  enum class Reason { non_convergence, slater_violation };

  OracleError(Reason reason, int round, double residual, const std::string& what)
      : Error(ErrorCategory::oracle, what), reason_(reason), round_(round), residual_(residual) {}

  Reason reason() const noexcept { return reason_; }
  int round() const noexcept { return round_; }
  double residual() const noexcept { return residual_; }

 private:
  Reason reason_;
  int round_;
  double residual_;
};

}  // namespace dgne
