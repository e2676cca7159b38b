#pragma once

#include <stdexcept>
#include <string>

namespace wid {

// Raised when a run produces a nonfinite quantity or an estimate escapes the
// configured norm bound; carries the sample index where it happened.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

  long step_index() const { return step_; }

 private:
  long step_;
};

}  // namespace wid
