#pragma once

#include <stdexcept>
#include <string>

namespace mnh {

/// Invalid model or run configuration (unknown key, variant/field mismatch, ...).
class ConfigError : public std::runtime_error {
   public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad argument to a numerical routine (wrong shape, non-finite input, ...).
class ArgumentError : public std::invalid_argument {
   public:
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// Output file could not be written.
class IoError : public std::runtime_error {
   public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mnh
