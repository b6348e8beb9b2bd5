#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "mrcal/joint.hpp"
#include "mrcal/one_factor.hpp"
#include "mrcal/spot_prompt.hpp"
#include "mrcal/stats.hpp"

namespace mrcal::app {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kToolName = "mrcal";
inline constexpr std::string_view kReportSchema = "mrcal-report/1";

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

/// Finite numbers are stored as is; anything else becomes null and a sibling
/// "<key>_null_reason" string is added.
void put_number(Json& j, const std::string& key, double v, std::string_view reason);
/// Reads a number written by put_number (null reads back as NaN).
double get_number(const nlohmann::json& j, const std::string& key);

Json to_json(const stats::Interval& ci);
Json to_json(const stats::FitReport& fit);
stats::FitReport fit_from_json(const nlohmann::json& j);

/// Parameter blocks; each reads back to an equal object.
Json to_json(const mr::MRParams& p);
Json to_json(const mr::BSParams& p);
Json to_json(const sp::SPParams& p);
mr::MRParams mr_params_from_json(const nlohmann::json& j);
mr::BSParams bs_params_from_json(const nlohmann::json& j);
sp::SPParams sp_params_from_json(const nlohmann::json& j);

/// Correlation tables and bucket matrices of a joint model.
Json to_json(const joint::JointModel& m);

/// Human-oriented rendering of a report document. Every number is printed
/// with the same digits as in the JSON form.
std::string render_text(const Json& report);

}  // namespace mrcal::app
