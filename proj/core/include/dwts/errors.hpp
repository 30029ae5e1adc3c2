#ifndef DWTS_ERRORS_HPP
#define DWTS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dwts {

// Argument errors are reported with std::invalid_argument. The types below
// cover the remaining failure classes.

/// An operation was applied to an object in the wrong state (e.g. mutating a
/// frozen bank, building mipmaps from an unfrozen one).
class InvalidState : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Malformed file contents.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Well-formed file using a codec or layout this library does not read.
class UnsupportedError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values surfaced during optimization.
class NumericError : public std::runtime_error {
public:
  NumericError(int iteration, std::string block, const std::string& what)
      : std::runtime_error(what), iteration_(iteration), block_(std::move(block)) {}

  int iteration() const noexcept { return iteration_; }
  const std::string& block() const noexcept { return block_; }

private:
  int iteration_;
  std::string block_;
};

}  // namespace dwts

#endif  // DWTS_ERRORS_HPP
