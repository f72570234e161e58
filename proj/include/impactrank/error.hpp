#pragma once

#include <stdexcept>
#include <string>

namespace impactrank {

/// Bad or inconsistent input data (malformed files, schema mismatches).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line usage.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace impactrank
