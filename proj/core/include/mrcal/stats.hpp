#pragma once

#include <cstddef>
#include <span>

namespace mrcal::stats {

struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sqrt of the second central moment (1/n)
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

/// Central-moment statistics: S = mu3 / mu2^{3/2}, K = mu4 / mu2^2 - 3.
/// Throws for n < 2 or a zero second moment.
Moments moments(std::span<const double> x);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// JB = n/6 (S^2 + K^2/4). The p-value comes from a simulated null table for
/// n <= 2000 and from the chi-square(2) tail above that. Requires n >= 8.
TestResult jarque_bera(std::span<const double> x);

/// p-value of a Jarque-Bera statistic for sample size n (exposed for tests).
double jarque_bera_pvalue(double statistic, std::size_t n);

/// One-sample Kolmogorov-Smirnov test against the standard normal.
/// Requires n >= 5.
TestResult ks_test(std::span<const double> x);

/// Kolmogorov tail Q(l) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 l^2), clamped to [0, 1].
double q_ks(double lambda);

struct FitReport {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double jb_stat = 0.0;
    double jb_pvalue = 1.0;
    double ks_stat = 0.0;
    double ks_pvalue = 1.0;
};

FitReport fit_report(std::span<const double> residuals);

struct Interval {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.05;

    double width() const noexcept { return upper - lower; }
    bool contains(double v) const noexcept { return lower <= v && v <= upper; }
};

/// Chi-square interval for a volatility estimated from n observations.
Interval vol_ci(double sigma, std::size_t n, double alpha);

/// Fisher-z interval for a correlation estimated from n pairs.
Interval corr_ci(double rho, std::size_t n, double alpha);

/// Standard error of the MLE rate, scaled from the regression seed's error.
double mr_ci(double rate, double seed_rate, double seed_stderr);

/// Delta-method widening for estimates that also depend on an estimated
/// mean-reversion rate: the half-widths are combined in quadrature with
/// z * |d estimate / d rate| * rate_stderr. Volatility intervals are widened
/// on the log scale, correlation intervals on the Fisher-z scale, so the
/// results stay positive and inside (-1, 1) respectively.
Interval widen_vol_for_rate(const Interval& base, double sensitivity, double rate_stderr);
Interval widen_corr_for_rate(const Interval& base, double sensitivity, double rate_stderr);

// Special functions.
double normal_cdf(double x);
double normal_quantile(double p);
/// Quantile of the chi-square distribution with `dof` degrees of freedom at
/// lower-tail probability p.
double chi_square_quantile(double p, double dof);
/// Upper tail of chi-square(dof).
double chi_square_sf(double x, double dof);

/// Sample Pearson correlation. Throws when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace mrcal::stats
