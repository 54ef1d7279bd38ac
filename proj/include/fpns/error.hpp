#pragma once

#include <stdexcept>
#include <string>

namespace fpns {

/// Base class of every error raised by the library. `kind()` is the
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

class ParameterError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parameter"; }
};

/// CFL or other time-step restriction violated.
class StepSizeError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "step_size"; }
};

/// Averaging model cannot be evaluated (thin flock, empty community).
class DegenerateModelError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "degenerate_model"; }
};

class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
    const char* kind() const noexcept override { return "config"; }
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "format"; }
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "insufficient_data"; }
};

}  // namespace fpns
