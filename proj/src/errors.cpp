#include "medfab/errors.hpp"

namespace medfab {

int exit_code(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kConfig: return 2;
    case ErrorCategory::kProvider: return 3;
    case ErrorCategory::kData: return 4;
  }
  return 1;
}

}  // namespace medfab
