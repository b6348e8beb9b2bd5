#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrcal {

/// Calendar date-time at minute resolution, taken at face value (no zones).
using Timestamp = std::chrono::sys_time<std::chrono::minutes>;

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0);

/// Accepts `YYYY-MM-DD` or `YYYY-MM-DDTHH:MM`.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Inverse of parse_timestamp; the time part is omitted at midnight.
std::string format_timestamp(Timestamp t);

std::chrono::year_month_day civil_date(Timestamp t);

struct MonthYear {
    int year = 0;
    int month = 0;  // 1..12

    auto operator<=>(const MonthYear&) const = default;
};

MonthYear month_year(Timestamp t);

/// ACT/365 fixed year fraction between two instants. Throws unless t2 > t1.
double year_fraction(Timestamp t1, Timestamp t2);

enum class Transform { Log, Identity };

std::string_view to_string(Transform transform);
std::optional<Transform> parse_transform(std::string_view text);

// ---------------------------------------------------------------------------
// Term-structure buckets.

/// Granularity of the mean-reversion level / drift term structure.
enum class LevelGranularity {
    MonthYear,      // one level per (month, year)
    CalendarMonth,  // one level per calendar month, shared across years
    Flat
};

/// Granularity of periodic term structures (volatility, correlation).
enum class PeriodGranularity {
    Monthly,   // 12 buckets
    Seasonal,  // DJF, MAM, JJA, SON
    Flat
};

std::string_view to_string(LevelGranularity g);
std::string_view to_string(PeriodGranularity g);
std::optional<LevelGranularity> parse_level_granularity(std::string_view text);
std::optional<PeriodGranularity> parse_period_granularity(std::string_view text);

/// Level bucket key. `year == 0` means "every year", `month == 0` "every month".
struct LevelBucket {
    int year = 0;
    int month = 0;

    auto operator<=>(const LevelBucket&) const = default;
};

LevelBucket level_bucket(MonthYear my, LevelGranularity g);
std::string level_label(LevelBucket bucket);

/// Periodic bucket of a calendar month: 1..12 (monthly), 1..4 (seasonal,
/// 1 = Dec-Feb), or 0 (flat).
int period_bucket(int month, PeriodGranularity g);
std::string period_label(int bucket, PeriodGranularity g);
std::vector<int> period_buckets(PeriodGranularity g);

/// True when every bucket of `fine` lies inside a single bucket of `coarse`.
bool nests_within(PeriodGranularity fine, PeriodGranularity coarse);

// ---------------------------------------------------------------------------
// Series.

struct Observation {
    Timestamp time;
    double value = 0.0;
};

/// Irregularly sampled observations with strictly increasing timestamps.
class PriceSeries {
public:
    /// Sorts by timestamp, then validates: >= 2 points, no duplicate
    /// timestamps, finite values.
    PriceSeries(std::string label, std::vector<Observation> observations);

    const std::string& label() const noexcept { return label_; }
    const std::vector<Observation>& observations() const noexcept { return obs_; }
    std::size_t size() const noexcept { return obs_.size(); }
    const Observation& operator[](std::size_t i) const { return obs_[i]; }
    const Observation& front() const { return obs_.front(); }
    const Observation& back() const { return obs_.back(); }

    bool all_positive() const noexcept;

private:
    std::string label_;
    std::vector<Observation> obs_;
};

/// Reads a `date` column plus the named value column (the first non-date
/// column when `value_column` is empty). Empty cells are skipped.
PriceSeries load_csv(const std::filesystem::path& path, std::string_view value_column = {});

/// Observation density: 365 * points / span-in-days.
double daycount(const PriceSeries& series);

/// One transition X_{k-1} -> X_k. Buckets follow the earlier timestamp.
struct Step {
    Timestamp start;
    Timestamp end;
    double prev = 0.0;
    double next = 0.0;
    double dt = 0.0;  // years
    MonthYear bucket;

    int month() const noexcept { return bucket.month; }
};

struct StepSeries {
    std::string label;
    Transform transform = Transform::Log;
    std::vector<Step> pairs;

    std::size_t size() const noexcept { return pairs.size(); }
};

StepSeries to_steps(const PriceSeries& series, Transform transform);

/// Drops every step whose interval (start, end] contains one of `breaks`.
StepSeries drop_steps_spanning(const StepSeries& steps, const std::vector<Timestamp>& breaks);

// ---------------------------------------------------------------------------
// Factor (standardized innovation) series.

struct FactorPoint {
    Timestamp time;
    double value = 0.0;
};

struct FactorSeries {
    std::string label;
    std::vector<FactorPoint> points;

    std::size_t size() const noexcept { return points.size(); }
    std::vector<double> values() const;
};

struct AlignedPair {
    std::vector<Timestamp> times;
    std::vector<double> first;
    std::vector<double> second;

    std::size_t size() const noexcept { return times.size(); }
};

/// Inner join on timestamps, order preserved. Throws on empty intersection.
AlignedPair align(const FactorSeries& a, const FactorSeries& b);

/// Restricts two price series to their common timestamps.
std::pair<PriceSeries, PriceSeries> align(const PriceSeries& a, const PriceSeries& b);

}  // namespace mrcal
