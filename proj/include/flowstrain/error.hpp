// error.hpp - exception hierarchy shared by every flowstrain module.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowstrain {

// Broad classes used by the CLI to select an exit code.
enum class ErrorKind {
    Data,       // malformed input, shape problems, bad parameters
    Numerical,  // degenerate images, non-finite losses
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

#define FLOWSTRAIN_DATA_ERROR(Name)                                                  \
    class Name : public Error {                                                      \
      public:                                                                        \
        explicit Name(const std::string &what) : Error(ErrorKind::Data, what) {}     \
    };

#define FLOWSTRAIN_NUMERICAL_ERROR(Name)                                             \
    class Name : public Error {                                                      \
      public:                                                                        \
        explicit Name(const std::string &what) : Error(ErrorKind::Numerical, what) {} \
    };

FLOWSTRAIN_DATA_ERROR(ShapeMismatch)
FLOWSTRAIN_DATA_ERROR(InvalidCoordinate)
FLOWSTRAIN_DATA_ERROR(InvalidParameter)
FLOWSTRAIN_DATA_ERROR(FormatError)
FLOWSTRAIN_DATA_ERROR(InsufficientData)
FLOWSTRAIN_DATA_ERROR(EmptyDomain)
FLOWSTRAIN_DATA_ERROR(ShapeError)
FLOWSTRAIN_DATA_ERROR(IoError)
FLOWSTRAIN_NUMERICAL_ERROR(DegenerateImage)
FLOWSTRAIN_NUMERICAL_ERROR(NonFiniteLoss)

#undef FLOWSTRAIN_DATA_ERROR
#undef FLOWSTRAIN_NUMERICAL_ERROR

// Architecture DSL diagnostics carry the 1-based source line.
class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string &msg)
        : Error(ErrorKind::Data, "line " + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

}  // namespace flowstrain
