#pragma once

#include <stdexcept>
#include <string>

namespace wxd {

/// Bad input data: unreadable files, malformed rows, invalid series.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An estimator or solver failed to produce a usable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration (unknown fields, wrong types, missing keys).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wxd
