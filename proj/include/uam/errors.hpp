#pragma once

#include <stdexcept>
#include <string>

namespace uam {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// A loaded or constructed object broke one of its invariants. `field()` names
/// the offending field using a dotted path (e.g. "flights[3].od").
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InfeasibleTopology : public Error {
 public:
  using Error::Error;
};

class NoZone : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class EmptyAccumulator : public Error {
 public:
  EmptyAccumulator() : Error("no exposure: accumulator is empty") {}
};

class RouteTooShort : public Error {
 public:
  using Error::Error;
};

class MissingAction : public Error {
 public:
  using Error::Error;
};

class UnknownAircraft : public Error {
 public:
  using Error::Error;
};

class NotEnroute : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class EmptyTrajectory : public Error {
 public:
  EmptyTrajectory() : Error("trajectory is empty") {}
};

}  // namespace uam
