#pragma once

#include <stdexcept>
#include <string>

namespace saldiff {

// Error taxonomy used across the library. The CLI maps these onto exit
// codes: usage/config -> 1, data -> 2, numeric -> 3.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VocabError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace saldiff
