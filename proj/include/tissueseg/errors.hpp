#pragma once

#include <stdexcept>
#include <string>

namespace tseg {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Grids that must share a shape do not. `file()` names the offender when
/// the grids came from disk.
class DimensionMismatchError : public std::runtime_error {
public:
    DimensionMismatchError(const std::string& what, std::string file = {})
        : std::runtime_error(what), file_(std::move(file)) {}
    const std::string& file() const { return file_; }

private:
    std::string file_;
};

class InvalidLabelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input cannot be processed as-is (constant intensities, empty masks, ...).
class DegenerateInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace tseg
