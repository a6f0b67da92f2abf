#pragma once

#include <stdexcept>
#include <string>

namespace hintbandit {

// Base for every error raised by the library. Callers that only care about
// "something in hintbandit failed" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnknownWord : public Error {
 public:
  explicit UnknownWord(const std::string& word)
      : Error("unknown word: '" + word + "'"), word_(word) {}

  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

// An arm cannot produce a hint from the current context (e.g. nothing said
// yet for the semantic arm, or the candidate pool is exhausted).
class ArmUnavailable : public Error {
 public:
  using Error::Error;
};

// Operation not permitted in the current state (double resolve, hint in an
// unhinted session, finalize twice, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

class SessionExpired : public StateError {
 public:
  using StateError::StateError;
};

// Record or request that does not conform to the documented JSON schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace hintbandit
