#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace cbench {

// All library failures carry a stable machine-readable code (e.g.
// "NonBinaryTreatment", "ZeroDenominator") next to a human message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

inline void require(bool cond, const char* code, const std::string& message) {
  if (!cond) throw Error(code, message);
}

}  // namespace cbench
