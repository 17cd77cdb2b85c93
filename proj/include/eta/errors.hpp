#pragma once

#include <stdexcept>
#include <string>

namespace eta {

// Error taxonomy shared by all modules. The CLI maps each class to a
// distinct process exit code.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace eta
