#pragma once

#include <stdexcept>

namespace irca
{

/// Invalid user configuration (CLI exit code 2).
struct ConfigError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Unreadable or unwritable file (CLI exit code 3).
struct IoError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Inputs that are individually valid but inconsistent with each other (CLI exit code 4).
struct DataMismatchError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

} // namespace irca
