#pragma once

#include <string>

#include "config.hpp"
#include "report.hpp"

namespace mrcal::app {

inline constexpr std::string_view kVersion = "0.1.0";

struct Outcome {
    int exit_code = 0;
    Json report;
};

/// Runs one command end to end. Never throws: failures come back as a
/// report carrying an `error` object and a nonzero exit code.
Outcome run(const RunConfig& config);

/// Serializes a report in the requested format (JSON: 2-space indent,
/// trailing newline).
std::string format_report(const Json& report, ReportFormat format);

/// The built-in invariant suite behind the `selftest` command.
Json selftest();

}  // namespace mrcal::app
