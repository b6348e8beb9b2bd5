#include "mrcal/timeseries.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mrcal/error.hpp"

namespace mrcal {

namespace chr = std::chrono;

namespace {

constexpr double kMinutesPerYear = 365.0 * 24.0 * 60.0;

constexpr std::array<const char*, 12> kMonthNames = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                     "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            cells.push_back(trim(line.substr(pos)));
            break;
        }
        cells.push_back(trim(line.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return cells;
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour, int minute) {
    const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
    if (!ymd.ok()) throw Error("invalid calendar date");
    return chr::sys_days{ymd} + chr::hours{hour} + chr::minutes{minute};
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    text = trim(text);
    if (text.size() != 10 && text.size() != 16) return std::nullopt;
    if (text[4] != '-' || text[7] != '-') return std::nullopt;
    int year = 0;
    unsigned month = 0;
    unsigned day = 0;
    if (!parse_int(text.substr(0, 4), year) || !parse_int(text.substr(5, 2), month) ||
        !parse_int(text.substr(8, 2), day))
        return std::nullopt;
    int hour = 0;
    int minute = 0;
    if (text.size() == 16) {
        if ((text[10] != 'T' && text[10] != ' ') || text[13] != ':') return std::nullopt;
        if (!parse_int(text.substr(11, 2), hour) || !parse_int(text.substr(14, 2), minute)) return std::nullopt;
        if (hour < 0 || hour > 23 || minute < 0 || minute > 59) return std::nullopt;
    }
    const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
    if (!ymd.ok()) return std::nullopt;
    return chr::sys_days{ymd} + chr::hours{hour} + chr::minutes{minute};
}

std::string format_timestamp(Timestamp t) {
    const auto day = chr::floor<chr::days>(t);
    const chr::year_month_day ymd{day};
    const auto minutes = (t - day).count();
    char buf[32];
    if (minutes == 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                      static_cast<int>(minutes / 60), static_cast<int>(minutes % 60));
    }
    return buf;
}

chr::year_month_day civil_date(Timestamp t) { return chr::year_month_day{chr::floor<chr::days>(t)}; }

MonthYear month_year(Timestamp t) {
    const auto ymd = civil_date(t);
    return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month()))};
}

double year_fraction(Timestamp t1, Timestamp t2) {
    if (t2 <= t1)
        throw Error("year_fraction: end " + format_timestamp(t2) + " is not after start " + format_timestamp(t1));
    return static_cast<double>((t2 - t1).count()) / kMinutesPerYear;
}

std::string_view to_string(Transform transform) {
    return transform == Transform::Log ? "lognormal" : "normal";
}

std::optional<Transform> parse_transform(std::string_view text) {
    if (text == "lognormal" || text == "log") return Transform::Log;
    if (text == "normal" || text == "identity") return Transform::Identity;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

std::string_view to_string(LevelGranularity g) {
    switch (g) {
        case LevelGranularity::MonthYear: return "month-year";
        case LevelGranularity::CalendarMonth: return "calendar-month";
        case LevelGranularity::Flat: return "flat";
    }
    return "?";
}

std::string_view to_string(PeriodGranularity g) {
    switch (g) {
        case PeriodGranularity::Monthly: return "monthly";
        case PeriodGranularity::Seasonal: return "seasonal";
        case PeriodGranularity::Flat: return "flat";
    }
    return "?";
}

std::optional<LevelGranularity> parse_level_granularity(std::string_view text) {
    if (text == "month-year" || text == "monthly") return LevelGranularity::MonthYear;
    if (text == "calendar-month") return LevelGranularity::CalendarMonth;
    if (text == "flat") return LevelGranularity::Flat;
    return std::nullopt;
}

std::optional<PeriodGranularity> parse_period_granularity(std::string_view text) {
    if (text == "monthly") return PeriodGranularity::Monthly;
    if (text == "seasonal") return PeriodGranularity::Seasonal;
    if (text == "flat") return PeriodGranularity::Flat;
    return std::nullopt;
}

LevelBucket level_bucket(MonthYear my, LevelGranularity g) {
    switch (g) {
        case LevelGranularity::MonthYear: return {my.year, my.month};
        case LevelGranularity::CalendarMonth: return {0, my.month};
        case LevelGranularity::Flat: return {0, 0};
    }
    return {};
}

std::string level_label(LevelBucket bucket) {
    if (bucket.month == 0) return "all";
    if (bucket.year == 0) return kMonthNames[static_cast<std::size_t>(bucket.month - 1)];
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", bucket.year, bucket.month);
    return buf;
}

int period_bucket(int month, PeriodGranularity g) {
    switch (g) {
        case PeriodGranularity::Monthly: return month;
        case PeriodGranularity::Seasonal: return (month % 12) / 3 + 1;
        case PeriodGranularity::Flat: return 0;
    }
    return 0;
}

std::string period_label(int bucket, PeriodGranularity g) {
    switch (g) {
        case PeriodGranularity::Monthly: return kMonthNames[static_cast<std::size_t>(bucket - 1)];
        case PeriodGranularity::Seasonal: {
            static constexpr std::array<const char*, 4> names = {"DJF", "MAM", "JJA", "SON"};
            return names[static_cast<std::size_t>(bucket - 1)];
        }
        case PeriodGranularity::Flat: return "all";
    }
    return "?";
}

std::vector<int> period_buckets(PeriodGranularity g) {
    switch (g) {
        case PeriodGranularity::Monthly: return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
        case PeriodGranularity::Seasonal: return {1, 2, 3, 4};
        case PeriodGranularity::Flat: return {0};
    }
    return {};
}

bool nests_within(PeriodGranularity fine, PeriodGranularity coarse) {
    const auto rank = [](PeriodGranularity g) {
        switch (g) {
            case PeriodGranularity::Monthly: return 0;
            case PeriodGranularity::Seasonal: return 1;
            case PeriodGranularity::Flat: return 2;
        }
        return 0;
    };
    return rank(fine) <= rank(coarse);
}

// ---------------------------------------------------------------------------

PriceSeries::PriceSeries(std::string label, std::vector<Observation> observations)
    : label_(std::move(label)), obs_(std::move(observations)) {
    std::stable_sort(obs_.begin(), obs_.end(),
                     [](const Observation& a, const Observation& b) { return a.time < b.time; });
    if (obs_.size() < 2) throw Error("series '" + label_ + "' needs at least 2 observations");
    for (std::size_t i = 0; i < obs_.size(); ++i) {
        if (!std::isfinite(obs_[i].value))
            throw Error("series '" + label_ + "': non-finite value at " + format_timestamp(obs_[i].time));
        if (i > 0 && obs_[i].time == obs_[i - 1].time)
            throw Error("series '" + label_ + "': duplicate timestamp " + format_timestamp(obs_[i].time));
    }
}

bool PriceSeries::all_positive() const noexcept {
    return std::all_of(obs_.begin(), obs_.end(), [](const Observation& o) { return o.value > 0.0; });
}

PriceSeries load_csv(const std::filesystem::path& path, std::string_view value_column) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, header_line)) {
        ++line_no;
        if (!trim(header_line).empty()) break;
    }
    if (trim(header_line).empty()) throw Error(path.string() + ": missing header row");
    // Strip a UTF-8 byte-order mark.
    if (header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
    header = split_csv_line(header_line);

    const auto date_it = std::find(header.begin(), header.end(), std::string_view("date"));
    if (date_it == header.end()) throw Error(path.string() + ": no 'date' column in header");
    const auto date_col = static_cast<std::size_t>(date_it - header.begin());

    std::size_t value_col = header.size();
    if (value_column.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i != date_col) {
                value_col = i;
                break;
            }
        }
    } else {
        const auto it = std::find(header.begin(), header.end(), value_column);
        if (it != header.end()) value_col = static_cast<std::size_t>(it - header.begin());
    }
    if (value_col == header.size())
        throw Error(path.string() + ": value column '" + std::string(value_column) + "' not found");
    const std::string column_name(header[value_col]);

    std::vector<Observation> obs;
    std::set<Timestamp> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        const auto where = path.string() + " row " + std::to_string(line_no);
        if (cells.size() <= std::max(date_col, value_col)) {
            // A short row with the value cell missing entirely is a missing value.
            if (cells.size() > date_col && cells.size() == value_col) continue;
            throw Error(where + ": expected " + std::to_string(header.size()) + " cells");
        }
        const auto t = parse_timestamp(cells[date_col]);
        if (!t) throw Error(where + ": cannot parse date '" + std::string(cells[date_col]) + "'");
        const auto cell = cells[value_col];
        if (cell.empty()) continue;
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v))
            throw Error(where + ": cannot parse value '" + std::string(cell) + "'");
        if (!seen.insert(*t).second)
            throw Error(where + ": duplicate timestamp " + format_timestamp(*t));
        obs.push_back({*t, v});
    }
    if (obs.size() < 2)
        throw Error(path.string() + ": fewer than 2 valid rows in column '" + column_name + "'");
    return PriceSeries(column_name, std::move(obs));
}

double daycount(const PriceSeries& series) {
    const auto span_minutes = (series.back().time - series.front().time).count();
    if (span_minutes <= 0) throw Error("daycount: series '" + series.label() + "' spans zero time");
    const double span_days = static_cast<double>(span_minutes) / (24.0 * 60.0);
    return 365.0 * static_cast<double>(series.size()) / span_days;
}

StepSeries to_steps(const PriceSeries& series, Transform transform) {
    StepSeries steps;
    steps.label = series.label();
    steps.transform = transform;
    steps.pairs.reserve(series.size() - 1);
    const auto map = [&](const Observation& o) {
        if (transform == Transform::Identity) return o.value;
        if (!(o.value > 0.0))
            throw Error("series '" + series.label() + "': non-positive price at " + format_timestamp(o.time) +
                        " under the lognormal model");
        return std::log(o.value);
    };
    double prev = map(series[0]);
    for (std::size_t k = 1; k < series.size(); ++k) {
        const double next = map(series[k]);
        const auto& a = series[k - 1];
        const auto& b = series[k];
        steps.pairs.push_back({a.time, b.time, prev, next, year_fraction(a.time, b.time), month_year(a.time)});
        prev = next;
    }
    return steps;
}

StepSeries drop_steps_spanning(const StepSeries& steps, const std::vector<Timestamp>& breaks) {
    if (breaks.empty()) return steps;
    auto sorted = breaks;
    std::sort(sorted.begin(), sorted.end());
    StepSeries out{steps.label, steps.transform, {}};
    out.pairs.reserve(steps.size());
    for (const auto& s : steps.pairs) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), s.start);
        if (it != sorted.end() && *it <= s.end) continue;
        out.pairs.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<double> FactorSeries::values() const {
    std::vector<double> v;
    v.reserve(points.size());
    for (const auto& p : points) v.push_back(p.value);
    return v;
}

AlignedPair align(const FactorSeries& a, const FactorSeries& b) {
    if (a.points.empty() || b.points.empty()) throw Error("align: empty factor series");
    AlignedPair out;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.points.size() && j < b.points.size()) {
        const auto ta = a.points[i].time;
        const auto tb = b.points[j].time;
        if (ta < tb) {
            ++i;
        } else if (tb < ta) {
            ++j;
        } else {
            out.times.push_back(ta);
            out.first.push_back(a.points[i].value);
            out.second.push_back(b.points[j].value);
            ++i;
            ++j;
        }
    }
    if (out.times.empty())
        throw Error("align: series '" + a.label + "' and '" + b.label + "' share no timestamps");
    return out;
}

std::pair<PriceSeries, PriceSeries> align(const PriceSeries& a, const PriceSeries& b) {
    std::vector<Observation> oa;
    std::vector<Observation> ob;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].time < b[j].time) {
            ++i;
        } else if (b[j].time < a[i].time) {
            ++j;
        } else {
            oa.push_back(a[i++]);
            ob.push_back(b[j++]);
        }
    }
    if (oa.size() < 2)
        throw Error("align: series '" + a.label() + "' and '" + b.label() + "' share fewer than 2 timestamps");
    return {PriceSeries(a.label(), std::move(oa)), PriceSeries(b.label(), std::move(ob))};
}

}  // namespace mrcal
