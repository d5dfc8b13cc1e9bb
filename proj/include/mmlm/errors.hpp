#pragma once

#include <stdexcept>
#include <string>

namespace mmlm {

// Command line misuse: unknown flag, missing argument. CLI exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: bad file, bad config key, bad record. CLI exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dimension or layout violation in tensor code. CLI exit code 2.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN or infinity where a finite value is required. CLI exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mmlm
