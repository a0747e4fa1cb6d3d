#pragma once

#include <stdexcept>
#include <string>

namespace passviz {

/// Error categories; the CLI maps each to a process exit code.
enum class ErrorKind {
  usage,    // bad flags, unknown format tags, unknown extensions
  domain,   // input outside an operation's domain (empty corpus, k > M, ...)
  io,       // unreadable or unwritable files
  numeric,  // non-finite values during optimisation
  pattern,  // regular expression failed to compile
  version,  // serialised artefact has an unsupported schema/version
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(ErrorKind::io, path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class NumericError : public Error {
 public:
  NumericError(int iteration, const std::string& what)
      : Error(ErrorKind::numeric, what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class PatternError : public Error {
 public:
  PatternError(std::ptrdiff_t position, const std::string& what)
      : Error(ErrorKind::pattern, what + " at position " + std::to_string(position)),
        position_(position) {}
  std::ptrdiff_t position() const noexcept { return position_; }

 private:
  std::ptrdiff_t position_;
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& what) : Error(ErrorKind::version, what) {}
};

/// 1 usage/domain/pattern, 2 I/O, 3 numeric.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace passviz
