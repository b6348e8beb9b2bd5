#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrcal/stats.hpp"
#include "mrcal/timeseries.hpp"

namespace mrcal::mr {

/// Exact OU transition coefficients over a step of length dt:
/// X' = eta X + theta kappa + sigma gamma eps.
struct Coefs {
    double eta = 1.0;
    double kappa = 0.0;
    double gamma = 0.0;
};

Coefs coefs(double a, double dt);

struct TermStructureShape {
    LevelGranularity level = LevelGranularity::MonthYear;
    PeriodGranularity vol = PeriodGranularity::Monthly;
};

using LevelCurve = std::map<LevelBucket, double>;
using PeriodCurve = std::map<int, double>;

/// Closed-form level estimates for a fixed rate. Buckets without data are absent.
LevelCurve theta_hat(const StepSeries& steps, double a, LevelGranularity level = LevelGranularity::MonthYear);

/// Closed-form volatility estimates for a fixed rate and level curve.
/// Buckets with N <= 1 (unbiased) or N == 0 are absent.
PeriodCurve sigma_hat(const StepSeries& steps, double a, const LevelCurve& theta, bool unbiased,
                      TermStructureShape shape = {});

/// Profile log-likelihood L(a) with theta and the MLE sigma plugged in.
/// Bucket indices and distinct step lengths are precomputed once so that
/// repeated evaluations inside the optimizer stay cheap.
class ProfileLikelihood {
public:
    ProfileLikelihood(const StepSeries& steps, TermStructureShape shape);

    double operator()(double a) const;
    std::size_t size() const noexcept { return prev_.size(); }

private:
    std::vector<double> prev_;
    std::vector<double> next_;
    std::vector<std::size_t> dt_index_;
    std::vector<std::size_t> level_index_;
    std::vector<std::size_t> vol_index_;
    std::vector<double> dts_;
    std::size_t n_level_ = 0;
    std::size_t n_vol_ = 0;
};

double profile_loglik(const StepSeries& steps, double a, TermStructureShape shape = {});

struct RegressionSeed {
    double rate = 1.0;
    double stderr_rate = 0.0;  // +inf on fallback
    double kappa = 0.0;        // per-step AR(1) slope
    bool fallback = false;
};

/// Pooled AR(1) regression on bucket-demeaned values, annualized with the
/// observation density C (points per year).
RegressionSeed regression_seed(const StepSeries& steps, double daycount,
                               LevelGranularity level = LevelGranularity::MonthYear);

struct MRParams {
    Transform transform = Transform::Log;
    TermStructureShape shape;
    double rate = 0.0;
    std::optional<double> rate_stderr;  // absent when the seed fell back
    LevelCurve theta;
    PeriodCurve sigma;
    std::map<int, stats::Interval> sigma_ci;
    std::map<LevelBucket, std::size_t> level_counts;
    std::map<int, std::size_t> vol_counts;
    double alpha = 0.05;

    /// Bucket lookups; throw naming the bucket when it carries no estimate.
    double theta_at(MonthYear my) const;
    double sigma_at(int month) const;
};

struct CalibrationOptions {
    Transform transform = Transform::Log;
    TermStructureShape shape;
    bool unbiased = true;
    double alpha = 0.05;
};

struct MRCalibration {
    MRParams params;
    RegressionSeed seed;
    FactorSeries residuals;
    stats::FitReport fit;
    double daycount = 0.0;
    double loglik = 0.0;
    std::vector<std::string> diagnostics;
};

/// Full pipeline: regression seed, Brent search over log(a), closed-form
/// term structures, intervals, residuals and fit statistics.
MRCalibration calibrate(const PriceSeries& series, const CalibrationOptions& options = {});
MRCalibration calibrate(const StepSeries& steps, double daycount, const CalibrationOptions& options = {});

/// Maximizes L over [lo, hi] in log space (exposed for tests and the SP path).
double maximize_profile(const ProfileLikelihood& lik, double lo, double hi);

/// Standardized innovations (X' - eta X - theta kappa) / (sigma gamma),
/// stamped with the start of each step.
FactorSeries residuals(const StepSeries& steps, const MRParams& params);

// ---------------------------------------------------------------------------
// Zero-rate (Black-Scholes) limit.

struct BSParams {
    Transform transform = Transform::Log;
    TermStructureShape shape;
    LevelCurve mu;
    PeriodCurve sigma;
    std::map<int, stats::Interval> sigma_ci;
    std::map<LevelBucket, std::size_t> level_counts;
    std::map<int, std::size_t> vol_counts;
    double alpha = 0.05;

    double mu_at(MonthYear my) const;
    double sigma_at(int month) const;
};

/// Drift and volatility estimates; intervals are left empty.
BSParams bs_calibrate(const StepSeries& steps, TermStructureShape shape = {}, bool unbiased = true);

struct BSCalibration {
    BSParams params;
    FactorSeries residuals;
    stats::FitReport fit;
    std::vector<std::string> diagnostics;
};

BSCalibration calibrate_bs(const PriceSeries& series, const CalibrationOptions& options = {});
BSCalibration calibrate_bs(const StepSeries& steps, const CalibrationOptions& options = {});

/// (dX - mu dt) / (sigma sqrt(dt)), stamped with the start of each step.
FactorSeries bs_residuals(const StepSeries& steps, const BSParams& params);

}  // namespace mrcal::mr
