#pragma once

#include <stdexcept>
#include <string>

namespace anomaly {

// Exit-code classes for the CLI: config 1, data 2, numeric 3.
enum class ErrorClass { config = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
    ErrorClass error_class() const noexcept { return class_; }

private:
    ErrorClass class_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorClass::config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorClass::data, what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorClass::numeric, what) {}
};

// Shape errors are programming/config errors: a model and its input disagree.
struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(ErrorClass::config, what) {}
};

}  // namespace anomaly
