#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrcal/one_factor.hpp"
#include "mrcal/stats.hpp"
#include "mrcal/timeseries.hpp"

namespace mrcal::sp {

/// Correlation between the mean-reverting and the plain Brownian increment
/// over one step: kappa / (gamma sqrt(dt)).
double rho_nu_xi(double a, double dt);

/// sigma_S rho per bucket from the covariance of per-unit-time innovations:
/// Cov[x, y] = sigma_I (sigma_S rho - sigma_I). Sample covariance uses 1/(n-1).
/// Buckets with sigma_I == 0, missing sigma_I or fewer than 2 points are omitted.
std::map<int, double> covar_recover(std::span<const double> x_innov, std::span<const double> y_innov,
                                    std::span<const int> buckets, const std::map<int, double>& sigma_I);

struct SPOptions {
    mr::TermStructureShape shape;  // quotient level and every volatility
    PeriodGranularity corr = PeriodGranularity::Flat;
    bool unbiased = true;
    double alpha = 0.05;
    /// Steps spanning any of these instants (index rolls) are left out.
    std::vector<Timestamp> roll_dates;
};

struct InvalidBucket {
    int bucket = 0;
    std::string reason;
};

struct SPParams {
    mr::TermStructureShape shape;
    PeriodGranularity corr_granularity = PeriodGranularity::Flat;
    /// Granularity of sigma_S: the finer of the volatility and correlation
    /// granularities.
    PeriodGranularity spot_granularity = PeriodGranularity::Monthly;
    double alpha = 0.05;

    double rate = 0.0;
    std::optional<double> rate_stderr;

    mr::LevelCurve theta_tilde;
    mr::PeriodCurve sigma_q;
    mr::LevelCurve mu;
    mr::PeriodCurve sigma_I;
    mr::PeriodCurve sigma_S;  // keyed by spot_granularity buckets
    mr::PeriodCurve rho;      // keyed by corr_granularity buckets

    std::map<int, stats::Interval> sigma_q_ci;
    std::map<int, stats::Interval> sigma_I_ci;
    std::map<int, stats::Interval> sigma_S_ci;
    std::map<int, stats::Interval> rho_ci;

    std::map<LevelBucket, std::size_t> level_counts;
    std::map<int, std::size_t> vol_counts;
    std::map<int, std::size_t> spot_counts;
    std::map<int, std::size_t> corr_counts;
    std::vector<InvalidBucket> invalid;  // spot_granularity buckets

    double theta_tilde_at(MonthYear my) const;
    double sigma_q_at(int month) const;
    double mu_at(MonthYear my) const;
    double sigma_I_at(int month) const;
    double sigma_S_at(int month) const;
    double rho_at(int month) const;
};

struct SPCalibration {
    SPParams params;
    mr::MRCalibration quotient;
    FactorSeries spot_factor;
    FactorSeries index_factor;
    std::optional<stats::FitReport> spot_fit;
    std::optional<stats::FitReport> index_fit;
    std::vector<std::string> diagnostics;
};

/// Calibrates log(S/I) as a one-factor model and log I in the zero-rate
/// limit, then recovers the spot volatility and spot-index correlation.
SPCalibration calibrate_sp(const PriceSeries& spot, const PriceSeries& index, const SPOptions& options = {});

/// Approximate standardized spot innovations (x + y) / sigma_S, where x is
/// the quotient innovation over gamma and y the index innovation over sqrt(dt).
/// Steps are matched by position; both series must share timestamps.
FactorSeries spot_factor(const StepSeries& quotient, const StepSeries& log_index, const SPParams& params);

/// Standardized index innovations (dY - mu dt) / (sigma_I sqrt(dt)).
FactorSeries index_factor(const StepSeries& log_index, const SPParams& params);

}  // namespace mrcal::sp
