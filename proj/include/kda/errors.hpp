#pragma once

#include <stdexcept>
#include <string>

namespace kda {

// Every library failure derives from kda::Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
    using Error::Error;
};

class ArgumentError : public Error {
 public:
    using Error::Error;
};

class EmptyClassError : public Error {
 public:
    EmptyClassError(int label)
        : Error("class " + std::to_string(label) + " has no examples"), label_(label) {}
    int label() const { return label_; }

 private:
    int label_;
};

class DivisionByZeroError : public Error {
 public:
    using Error::Error;
};

class PreconditionError : public Error {
 public:
    using Error::Error;
};

class StateError : public Error {
 public:
    using Error::Error;
};

class ConfigError : public Error {
 public:
    using Error::Error;
};

class FormatError : public Error {
 public:
    using Error::Error;
};

class NumericError : public Error {
 public:
    using Error::Error;
};

}  // namespace kda
