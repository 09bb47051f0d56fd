#ifndef SIL_ERROR_HPP
#define SIL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace sil {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A request exceeds a configured memory or time budget, or the 2^63 range cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Input data does not cover the range an operation needs.
class RangeError : public Error {
public:
    using Error::Error;
};

/// A multiplicative function could not be evaluated (missing prime power rule).
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// A parameter is outside its documented domain.
class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace sil

#endif
