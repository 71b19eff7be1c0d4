#pragma once

#include <stdexcept>
#include <string>

namespace arnqs {

/// Base class of every error raised by the library. Maps to CLI exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid specification or configuration. Maps to CLI exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace arnqs
