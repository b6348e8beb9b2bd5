#include "mrcal/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "mrcal/error.hpp"

namespace mrcal::stats {

namespace {

#include "jb_null_table.inc"

// log p-value from the simulated table for ladder row `row`.
double table_log_pvalue(double jb, std::size_t row) {
    const auto& q = kJbQuantiles[row];
    const auto& p = kJbTailProbs;
    if (jb <= q[0]) {
        // Between (0, p=1) and the first tabulated quantile.
        return jb / q[0] * std::log(p[0]);
    }
    for (std::size_t i = 0; i + 1 < q.size(); ++i) {
        if (jb < q[i + 1]) {
            const double w = (jb - q[i]) / (q[i + 1] - q[i]);
            return (1.0 - w) * std::log(p[i]) + w * std::log(p[i + 1]);
        }
    }
    // Log-linear extrapolation past the last quantile.
    const std::size_t last = q.size() - 1;
    const double slope = (std::log(p[last]) - std::log(p[last - 1])) / (q[last] - q[last - 1]);
    return std::log(p[last]) + slope * (jb - q[last]);
}

}  // namespace

Moments moments(std::span<const double> x) {
    if (x.size() < 2) throw Error("moments: need at least 2 values");
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) throw Error("moments: degenerate sample (zero variance)");
    Moments m;
    m.n = x.size();
    m.mean = mean;
    m.stddev = std::sqrt(m2);
    m.skewness = m3 / (m2 * std::sqrt(m2));
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    return m;
}

double jarque_bera_pvalue(double statistic, std::size_t n) {
    if (statistic <= 0.0) return 1.0;
    if (n > kJbLadder.back()) return std::clamp(chi_square_sf(statistic, 2.0), 0.0, 1.0);
    if (n <= kJbLadder.front()) return std::clamp(std::exp(table_log_pvalue(statistic, 0)), 0.0, 1.0);
    std::size_t hi = 1;
    while (kJbLadder[hi] < n) ++hi;
    const std::size_t lo = hi - 1;
    const double w = (std::log(static_cast<double>(n)) - std::log(static_cast<double>(kJbLadder[lo]))) /
                     (std::log(static_cast<double>(kJbLadder[hi])) - std::log(static_cast<double>(kJbLadder[lo])));
    const double logp = (1.0 - w) * table_log_pvalue(statistic, lo) + w * table_log_pvalue(statistic, hi);
    return std::clamp(std::exp(logp), 0.0, 1.0);
}

TestResult jarque_bera(std::span<const double> x) {
    if (x.size() < 8) throw Error("jarque_bera: need at least 8 values, got " + std::to_string(x.size()));
    const auto m = moments(x);
    const double n = static_cast<double>(m.n);
    const double jb = n / 6.0 * (m.skewness * m.skewness + 0.25 * m.excess_kurtosis * m.excess_kurtosis);
    return {jb, jarque_bera_pvalue(jb, m.n)};
}

double q_ks(double lambda) {
    if (lambda < 1e-3) return 1.0;
    if (lambda < 1.18) {
        // The alternating series converges slowly here and its truncation
        // noise breaks monotonicity; the theta-function dual is exact.
        const double y = -std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
        double cdf = 0.0;
        for (int k = 1; k < 64; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double term = std::exp(y * odd * odd);
            cdf += term;
            if (term < 1e-17 * cdf) break;
        }
        cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    const double a2 = -2.0 * lambda * lambda;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j < 1000000; ++j) {
        const double term = std::exp(a2 * static_cast<double>(j) * static_cast<double>(j));
        sum += sign * term;
        if (term < 1e-12) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_test(std::span<const double> x) {
    if (x.size() < 5) throw Error("ks_test: need at least 5 values, got " + std::to_string(x.size()));
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d0 = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double cdf = normal_cdf(sorted[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d0 = std::max({d0, std::abs(lo - cdf), std::abs(hi - cdf)});
    }
    const double root_n = std::sqrt(n);
    return {d0, q_ks((root_n + 0.12 + 0.11 / root_n) * d0)};
}

FitReport fit_report(std::span<const double> residuals) {
    const auto m = moments(residuals);
    const auto jb = jarque_bera(residuals);
    const auto ks = ks_test(residuals);
    FitReport r;
    r.n = m.n;
    r.mean = m.mean;
    r.stddev = m.stddev;
    r.skewness = m.skewness;
    r.excess_kurtosis = m.excess_kurtosis;
    r.jb_stat = jb.statistic;
    r.jb_pvalue = jb.p_value;
    r.ks_stat = ks.statistic;
    r.ks_pvalue = ks.p_value;
    return r;
}

Interval vol_ci(double sigma, std::size_t n, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("vol_ci: alpha must lie in (0, 1)");
    if (n < 2) throw Error("vol_ci: need n >= 2");
    if (!(sigma > 0.0)) throw Error("vol_ci: volatility must be positive");
    const double dof = static_cast<double>(n - 1);
    const double chi_hi = chi_square_quantile(1.0 - alpha / 2.0, dof);
    const double chi_lo = chi_square_quantile(alpha / 2.0, dof);
    return {sigma, sigma * std::sqrt(dof / chi_hi), sigma * std::sqrt(dof / chi_lo), alpha};
}

Interval corr_ci(double rho, std::size_t n, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("corr_ci: alpha must lie in (0, 1)");
    if (!(std::abs(rho) < 1.0)) throw Error("corr_ci: |rho| must be below 1");
    if (n < 4) throw Error("corr_ci: need n >= 4");
    const double z = 0.5 * std::log((1.0 + rho) / (1.0 - rho));
    const double c = normal_quantile(1.0 - alpha / 2.0);
    const double half = c / std::sqrt(static_cast<double>(n) - 3.0);
    return {rho, std::tanh(z - half), std::tanh(z + half), alpha};
}

double mr_ci(double rate, double seed_rate, double seed_stderr) {
    if (!(seed_rate > 0.0)) throw Error("mr_ci: seed rate must be positive");
    return rate / seed_rate * seed_stderr;
}

Interval widen_vol_for_rate(const Interval& base, double sensitivity, double rate_stderr) {
    if (!std::isfinite(rate_stderr) || !std::isfinite(sensitivity) || !(base.estimate > 0.0)) return base;
    const double w = normal_quantile(1.0 - base.alpha / 2.0) * std::abs(sensitivity / base.estimate) * rate_stderr;
    const double centre = std::log(base.estimate);
    Interval out = base;
    out.lower = std::exp(centre - std::hypot(centre - std::log(base.lower), w));
    out.upper = std::exp(centre + std::hypot(std::log(base.upper) - centre, w));
    return out;
}

Interval widen_corr_for_rate(const Interval& base, double sensitivity, double rate_stderr) {
    if (!std::isfinite(rate_stderr) || !std::isfinite(sensitivity) || !(std::abs(base.estimate) < 1.0)) return base;
    const double rho = base.estimate;
    const double w = normal_quantile(1.0 - base.alpha / 2.0) * std::abs(sensitivity / (1.0 - rho * rho)) * rate_stderr;
    const double centre = std::atanh(rho);
    Interval out = base;
    out.lower = std::tanh(centre - std::hypot(centre - std::atanh(base.lower), w));
    out.upper = std::tanh(centre + std::hypot(std::atanh(base.upper) - centre, w));
    return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("normal_quantile: p must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double chi_square_quantile(double p, double dof) {
    if (!(p > 0.0 && p < 1.0)) throw Error("chi_square_quantile: p must lie in (0, 1)");
    if (!(dof > 0.0)) throw Error("chi_square_quantile: dof must be positive");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

double chi_square_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(dof), x));
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("pearson: need two equal-length samples of size >= 2");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace mrcal::stats
