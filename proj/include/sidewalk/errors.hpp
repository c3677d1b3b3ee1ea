#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sidewalk {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes (config-like errors -> 2, integrity errors -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: flags, config files, preconditions on arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : ConfigError(what + " at line " + std::to_string(line) + ", column " +
                    std::to_string(column)),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// A way references a node id that the document does not define.
class ReferentialIntegrityError : public ConfigError {
 public:
  ReferentialIntegrityError(long long way_id, long long node_id)
      : ConfigError("way " + std::to_string(way_id) + " references missing node " +
                    std::to_string(node_id)),
        way_id_(way_id),
        node_id_(node_id) {}

  long long way_id() const noexcept { return way_id_; }
  long long node_id() const noexcept { return node_id_; }

 private:
  long long way_id_;
  long long node_id_;
};

class EmptyNetworkError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

// Map cache file problems: wrong version or schema violation.
class MapFormatError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class MapVersionError : public MapFormatError {
 public:
  using MapFormatError::MapFormatError;
};

class MapTooSmallError : public Error {
 public:
  using Error::Error;
};

// Stepping a finished episode, and similar API misuse.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class NoPathError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t batch)
      : Error(what + " (batch " + std::to_string(batch) + ")"), batch_(batch) {}
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t batch_;
};

class PrefillStallError : public Error {
 public:
  using Error::Error;
};

// Replay found a log that disagrees with re-simulation.
class IntegrityError : public Error {
 public:
  IntegrityError(const std::string& what, long long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

}  // namespace sidewalk
