#pragma once

#include <stdexcept>
#include <string>

namespace slq {

/// Base class of every error raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Problem file does not match the schema. The message names the field and,
/// where relevant, the time index.
class ParseError : public Error {
 public:
  using Error::Error;
};

class NotClosedLoopSolvable : public Error {
 public:
  using Error::Error;
};

/// A regularized control weight could not be inverted at step `step()`.
class IllConditioned : public Error {
 public:
  IllConditioned(int step, const std::string& what)
      : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class InstanceTooLarge : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

/// A requested weak closed-loop window contains a step whose gains diverge.
class WindowTooLong : public Error {
 public:
  WindowTooLong(int step, const std::string& what)
      : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class UnsupportedCombination : public Error {
 public:
  using Error::Error;
};

}  // namespace slq
