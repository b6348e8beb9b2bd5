#pragma once

#include <stdexcept>
#include <string>

namespace mrcal {

/// Base error for every failure raised by the library. The message carries
/// enough context (file, row, bucket, parameter) to act on without a debugger.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the rate search cannot bracket a maximum. `best_rate` is the
/// best point visited, so callers can still report something useful.
class CalibrationError : public Error {
public:
    CalibrationError(const std::string& what, double best_rate)
        : Error(what), best_rate_(best_rate) {}

    double best_rate() const noexcept { return best_rate_; }

private:
    double best_rate_;
};

}  // namespace mrcal
