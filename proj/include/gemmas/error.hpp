#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gemmas {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed JSON; line and column are 1-based.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " (line " + std::to_string(line) + ", column " +
              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Well-formed document that does not match the trace schema.
class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& what)
      : Error("schema violation at '" + field + "': " + what),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A parsed graph failed validation. Carries the rendered violations.
class GraphInvariantError : public Error {
 public:
  GraphInvariantError(const std::string& where, std::vector<std::string> violations)
      : Error(build(where, violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string build(const std::string& where, const std::vector<std::string>& v) {
    std::string msg = "graph invariant violated in " + where + ":";
    for (const auto& s : v) msg += "\n  " + s;
    return msg;
  }

  std::vector<std::string> violations_;
};

class CycleError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRangeError : public Error {
 public:
  using Error::Error;
};

// Embedding backend could not be reached or refused the request.
class ProviderUnavailableError : public Error {
 public:
  using Error::Error;
};

class ZeroBaselineError : public Error {
 public:
  using Error::Error;
};

class DuplicateKeyError : public Error {
 public:
  using Error::Error;
};

}  // namespace gemmas
