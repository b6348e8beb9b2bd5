#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrcal/stats.hpp"
#include "mrcal/timeseries.hpp"

namespace mrcal::joint {

enum class ModelKind { MR, SP, BS };
/// Spot factors are the W_i, index factors the B_i of the joint model.
enum class FactorRole { Spot, Index };

std::string_view to_string(ModelKind kind);
std::string_view to_string(FactorRole role);

struct Factor {
    std::string member;
    ModelKind kind = ModelKind::MR;
    FactorRole role = FactorRole::Spot;
    FactorSeries series;

    /// "member:W" for spot factors, "member:B" for index factors.
    std::string name() const;
};

struct TrimResult {
    FactorSeries kept;
    std::vector<Timestamp> removed;  // sorted
};

/// Removes floor(pct n) points from each tail by value. Among equal values
/// the earlier timestamp goes first. Requires 0 <= pct <= 0.05.
TrimResult trim_outliers(const FactorSeries& factors, double pct);

struct Correlation {
    std::size_t i = 0;
    std::size_t j = 0;
    int bucket = 0;
    std::size_t n = 0;
    stats::Interval ci;  // estimate, lower, upper
};

/// Symmetric per-bucket matrix over all factors. Pairs without enough
/// overlap are stored as 0 and listed in `missing`.
struct BucketMatrix {
    std::size_t dim = 0;
    std::vector<double> values;  // row-major
    std::vector<std::pair<std::size_t, std::size_t>> missing;
    double min_eigenvalue = 1.0;

    double operator()(std::size_t i, std::size_t j) const { return values[i * dim + j]; }
};

struct JointModel {
    std::vector<Factor> factors;  // series kept trimmed-but-unaligned
    PeriodGranularity granularity = PeriodGranularity::Flat;
    double alpha = 0.05;
    double trim_pct = 0.0;
    std::vector<Correlation> correlations;  // i < j, ordered by (i, j, bucket)
    std::map<int, BucketMatrix> matrices;
    std::vector<std::string> diagnostics;

    std::optional<Correlation> find(std::size_t i, std::size_t j, int bucket) const;
};

/// Minimum number of aligned points a bucket needs to carry a correlation.
inline constexpr std::size_t kMinBucketOverlap = 8;

JointModel build_joint(std::vector<Factor> factors, PeriodGranularity granularity, double alpha = 0.05,
                       double trim_pct = 0.0);

struct WideBucket {
    std::size_t i = 0;
    std::size_t j = 0;
    int bucket = 0;
    double width = 0.0;
};

struct Recommendation {
    std::vector<WideBucket> flagged;
    std::optional<PeriodGranularity> suggestion;
    std::string note;
};

/// Advisory: lists correlations whose interval is wider than `max_width`
/// and proposes the next coarser granularity.
Recommendation granularity_check(const JointModel& model, double max_width);

/// Smallest eigenvalue of a symmetric matrix (row-major, dim x dim).
double min_eigenvalue(const std::vector<double>& values, std::size_t dim);

}  // namespace mrcal::joint
