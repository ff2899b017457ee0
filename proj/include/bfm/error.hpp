#pragma once

#include <stdexcept>
#include <string>

namespace bfm {

/// Raised when an argument lies outside the domain of an operation
/// (space mismatch, point outside a chart, singular differential, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised by expression evaluation (division by zero, log of a nonpositive value).
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::string node_path)
      : std::runtime_error(what + " at " + node_path), path_(std::move(node_path)) {}

  const std::string& node_path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Parse failure with a byte offset into the source text.
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Declared integration bounds contradicted by the computed iterates.
class InconsistentBounds : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration does not match the schema. `pointer` is a JSON pointer.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& pointer, const std::string& what)
      : std::runtime_error(pointer + ": " + what), pointer_(pointer) {}

  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace bfm
