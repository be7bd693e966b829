#pragma once

#include <stdexcept>
#include <string>

namespace etcons {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

/// A has an eigenvalue in the open right half-plane or a defective
/// imaginary-axis eigenvalue.
class NotNeutrallyStableError : public Error {
  public:
    using Error::Error;
};

class SynthesisError : public Error {
  public:
    using Error::Error;
};

/// The stacked regulator equations admit no common output map.
class RegulatorError : public Error {
  public:
    using Error::Error;
};

class TimeOrderError : public Error {
  public:
    using Error::Error;
};

class InvalidBoundError : public Error {
  public:
    using Error::Error;
};

class ValidationError : public Error {
  public:
    using Error::Error;
};

/// A state became non-finite during integration.
class DivergenceError : public Error {
  public:
    DivergenceError(const std::string& what, double time) : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

  private:
    double time_;
};

/// Scenario parse failure; `where` is a JSON pointer or byte offset.
class ParseError : public Error {
  public:
    ParseError(const std::string& where, const std::string& what)
        : Error(where + ": " + what), where_(where) {}
    const std::string& where() const noexcept { return where_; }

  private:
    std::string where_;
};

} // namespace etcons
