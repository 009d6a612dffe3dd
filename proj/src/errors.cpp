#include "dgne/errors.hpp"

namespace dgne {

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config:
    case ErrorCategory::contract:
    case ErrorCategory::assumption:
    case ErrorCategory::calendar:
    case ErrorCategory::game_definition:
      return 2;
    case ErrorCategory::divergence:
      return 3;
    case ErrorCategory::oracle:
      return 4;
  }
  return 1;
}

const char* category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::assumption: return "assumption";
    case ErrorCategory::calendar: return "calendar";
    case ErrorCategory::game_definition: return "game-definition";
    case ErrorCategory::divergence: return "divergence";
    case ErrorCategory::oracle: return "oracle";
  }
  return "unknown";
}

}  // namespace dgne
