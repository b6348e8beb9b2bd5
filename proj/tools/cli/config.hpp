#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "mrcal/simulate.hpp"
#include "mrcal/timeseries.hpp"

namespace mrcal::app {

enum class Command { CalibrateMR, CalibrateBS, CalibrateSP, CalibrateJoint, Simulate, Selftest };

std::string_view to_string(Command c);
std::optional<Command> parse_command(std::string_view text);

enum class ReportFormat { Json, Text };

struct InputSpec {
    std::string label;
    std::filesystem::path path;
    std::string column;  // empty: first value column

    bool operator==(const InputSpec&) const = default;
};

/// `label=path[:column]`.
InputSpec parse_input(std::string_view text);

struct GridSpec {
    Timestamp start;
    Timestamp end;
    sim::GridFrequency freq = sim::GridFrequency::Weekdays;

    bool operator==(const GridSpec&) const = default;
};

/// `start:end:freq`; start and end may carry a time part (which has colons).
GridSpec parse_grid(std::string_view text);

enum class SimModel { MR, BS, SP, Joint };
enum class Measure { RiskNeutral, RealWorld };

std::string_view to_string(SimModel m);
std::string_view to_string(Measure m);

struct SimSettings {
    SimModel model = SimModel::MR;
    Measure measure = Measure::RiskNeutral;
    // Risk-neutral parameters given directly.
    double rate = 0.0;
    std::vector<double> sigma;        // 1 (flat) or 12 monthly values
    std::vector<double> sigma_index;  // SP only
    std::vector<double> rho;          // SP only
    double forward_rate = 0.0;        // SP Samuelson damping b
    std::optional<double> flat_curve;
    std::optional<std::filesystem::path> curve;
    // Real-world parameters come from an earlier calibration report.
    std::optional<std::filesystem::path> params;
    std::string member;  // which model of the report; empty: the first
    std::optional<double> start_price;
    std::optional<double> start_index;
    std::optional<std::filesystem::path> paths_out;  // .bin: binary, else CSV

    bool operator==(const SimSettings&) const = default;
};

struct RunConfig {
    Command command = Command::CalibrateMR;
    std::vector<InputSpec> inputs;
    Transform transform = Transform::Log;
    LevelGranularity level = LevelGranularity::MonthYear;
    PeriodGranularity vol = PeriodGranularity::Monthly;
    PeriodGranularity corr = PeriodGranularity::Flat;
    double alpha = 0.05;
    double trim = 0.0;
    bool biased_vol = false;
    double max_corr_width = 0.2;  // joint granularity advisory threshold
    std::vector<std::pair<std::string, std::string>> sp_pairs;  // (spot, index) labels
    std::vector<std::string> bs_members;
    std::uint64_t seed = 0;
    std::size_t paths = 1;
    std::optional<GridSpec> grid;
    std::optional<std::filesystem::path> roll_dates;
    SimSettings sim;
    std::optional<std::filesystem::path> out;
    ReportFormat format = ReportFormat::Json;

    bool operator==(const RunConfig&) const = default;
};

/// Throws mrcal::Error on any out-of-range value.
void validate(const RunConfig& config);

nlohmann::ordered_json to_json(const RunConfig& config);
/// Reads the schema written by to_json; absent keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Dates listed one per line (an optional `date` header is skipped).
std::vector<Timestamp> load_roll_dates(const std::filesystem::path& path);

}  // namespace mrcal::app
