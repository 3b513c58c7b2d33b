#pragma once

#include <stdexcept>
#include <string>

namespace c2f {

/// Failure raised by any module; `module` names the subsystem for the CLI's
/// machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

}  // namespace c2f
