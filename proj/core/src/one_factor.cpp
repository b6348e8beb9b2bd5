#include "mrcal/one_factor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "mrcal/error.hpp"

namespace mrcal::mr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string period_name(int bucket, PeriodGranularity g) { return period_label(bucket, g); }

std::string describe(MonthYear my) {
    std::ostringstream os;
    os << my.year << '-' << (my.month < 10 ? "0" : "") << my.month;
    return os.str();
}

void check_rate(double a, const char* where) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw Error(std::string(where) + ": rate must be finite and >= 0");
}

// Per-bucket sums shared by theta_hat and calibrate.
struct LevelSums {
    double num = 0.0;
    double den = 0.0;
    std::size_t n = 0;
};

template <class Fn>
void for_each_step(const StepSeries& steps, double a, Fn&& fn) {
    for (const auto& s : steps.pairs) fn(s, coefs(a, s.dt));
}

}  // namespace

Coefs coefs(double a, double dt) {
    if (!(dt > 0.0)) throw Error("coefs: dt must be positive");
    check_rate(a, "coefs");
    const double x = a * dt;
    if (x < 1e-8) {
        // Second-order expansions around a = 0; the closed forms lose all
        // precision to cancellation here.
        return {1.0 - x + 0.5 * x * x, dt * (1.0 - 0.5 * x + x * x / 6.0),
                std::sqrt(dt * (1.0 - x + 2.0 * x * x / 3.0))};
    }
    return {std::exp(-x), -std::expm1(-x) / a, std::sqrt(-std::expm1(-2.0 * x) / (2.0 * a))};
}

LevelCurve theta_hat(const StepSeries& steps, double a, LevelGranularity level) {
    check_rate(a, "theta_hat");
    std::map<LevelBucket, LevelSums> sums;
    for_each_step(steps, a, [&](const Step& s, const Coefs& c) {
        auto& b = sums[level_bucket(s.bucket, level)];
        b.num += s.next - c.eta * s.prev;
        b.den += c.kappa;
        ++b.n;
    });
    LevelCurve out;
    for (const auto& [bucket, b] : sums) out.emplace(bucket, b.num / b.den);
    return out;
}

PeriodCurve sigma_hat(const StepSeries& steps, double a, const LevelCurve& theta, bool unbiased,
                      TermStructureShape shape) {
    check_rate(a, "sigma_hat");
    std::map<int, std::pair<double, std::size_t>> ss;
    for_each_step(steps, a, [&](const Step& s, const Coefs& c) {
        const auto lb = level_bucket(s.bucket, shape.level);
        const auto it = theta.find(lb);
        if (it == theta.end()) throw Error("sigma_hat: no level for bucket " + level_label(lb));
        const double r = (s.next - c.eta * s.prev - it->second * c.kappa) / c.gamma;
        auto& acc = ss[period_bucket(s.month(), shape.vol)];
        acc.first += r * r;
        ++acc.second;
    });
    const std::size_t u = unbiased ? 1 : 0;
    PeriodCurve out;
    for (const auto& [bucket, acc] : ss) {
        if (acc.second <= u) continue;
        out.emplace(bucket, std::sqrt(acc.first / static_cast<double>(acc.second - u)));
    }
    return out;
}

ProfileLikelihood::ProfileLikelihood(const StepSeries& steps, TermStructureShape shape) {
    if (steps.pairs.empty()) throw Error("profile likelihood: no steps");
    std::map<LevelBucket, std::size_t> levels;
    std::map<int, std::size_t> vols;
    std::map<double, std::size_t> dts;
    for (const auto& s : steps.pairs) {
        levels.emplace(level_bucket(s.bucket, shape.level), 0);
        vols.emplace(period_bucket(s.month(), shape.vol), 0);
        dts.emplace(s.dt, 0);
    }
    std::size_t i = 0;
    for (auto& [k, v] : levels) v = i++;
    i = 0;
    for (auto& [k, v] : vols) v = i++;
    i = 0;
    for (auto& [k, v] : dts) {
        v = i++;
        dts_.push_back(k);
    }
    n_level_ = levels.size();
    n_vol_ = vols.size();

    const std::size_t n = steps.pairs.size();
    prev_.reserve(n);
    next_.reserve(n);
    dt_index_.reserve(n);
    level_index_.reserve(n);
    vol_index_.reserve(n);
    for (const auto& s : steps.pairs) {
        prev_.push_back(s.prev);
        next_.push_back(s.next);
        dt_index_.push_back(dts.at(s.dt));
        level_index_.push_back(levels.at(level_bucket(s.bucket, shape.level)));
        vol_index_.push_back(vols.at(period_bucket(s.month(), shape.vol)));
    }
}

double ProfileLikelihood::operator()(double a) const {
    check_rate(a, "profile_loglik");
    std::vector<Coefs> c(dts_.size());
    std::vector<double> log_gamma(dts_.size());
    for (std::size_t j = 0; j < dts_.size(); ++j) {
        c[j] = coefs(a, dts_[j]);
        log_gamma[j] = std::log(c[j].gamma);
    }

    std::vector<double> num(n_level_, 0.0), den(n_level_, 0.0);
    const std::size_t n = prev_.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& ck = c[dt_index_[k]];
        num[level_index_[k]] += next_[k] - ck.eta * prev_[k];
        den[level_index_[k]] += ck.kappa;
    }

    std::vector<double> ss(n_vol_, 0.0);
    std::vector<std::size_t> cnt(n_vol_, 0);
    double sum_log_gamma = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& ck = c[dt_index_[k]];
        const double theta = num[level_index_[k]] / den[level_index_[k]];
        const double r = (next_[k] - ck.eta * prev_[k] - theta * ck.kappa) / ck.gamma;
        ss[vol_index_[k]] += r * r;
        ++cnt[vol_index_[k]];
        sum_log_gamma += log_gamma[dt_index_[k]];
    }

    // With sigma_v^2 = ss_v / N_v plugged in, each bucket's quadratic term
    // collapses to N_v / 2.
    double L = -sum_log_gamma - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    for (std::size_t v = 0; v < n_vol_; ++v) {
        if (!(ss[v] > 0.0)) return -kInf;
        const double nv = static_cast<double>(cnt[v]);
        L += -0.5 * nv * std::log(ss[v] / nv) - 0.5 * nv;
    }
    return L;
}

double profile_loglik(const StepSeries& steps, double a, TermStructureShape shape) {
    return ProfileLikelihood(steps, shape)(a);
}

RegressionSeed regression_seed(const StepSeries& steps, double daycount, LevelGranularity level) {
    if (steps.pairs.size() < 3) throw Error("regression_seed: need at least 3 steps");
    if (!(daycount > 0.0)) throw Error("regression_seed: daycount must be positive");

    // Bucket means play the role of the slowly varying level f_t; prev and
    // next values get their own means, as f_t and f_{t+dt} differ.
    std::map<LevelBucket, std::array<double, 3>> means;
    for (const auto& s : steps.pairs) {
        auto& m = means[level_bucket(s.bucket, level)];
        m[0] += s.prev;
        m[1] += s.next;
        m[2] += 1.0;
    }
    for (auto& [k, m] : means) {
        m[0] /= m[2];
        m[1] /= m[2];
    }

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& s : steps.pairs) {
        const auto& m = means.at(level_bucket(s.bucket, level));
        const double x = s.prev - m[0];
        const double y = s.next - m[1];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(steps.pairs.size());
    const double delta = n * sxx - sx * sx;
    if (!(delta > 0.0)) throw Error("regression_seed: zero variance in demeaned series");

    RegressionSeed seed;
    seed.kappa = (n * sxy - sx * sy) / delta;
    if (!(seed.kappa > 0.0 && seed.kappa < 1.0)) {
        seed.rate = 1.0;
        seed.stderr_rate = kInf;
        seed.fallback = true;
        return seed;
    }
    seed.rate = -std::log(seed.kappa) * daycount;
    seed.stderr_rate = std::sqrt(sxx / delta) / seed.kappa * daycount;
    return seed;
}

double MRParams::theta_at(MonthYear my) const {
    const auto b = level_bucket(my, shape.level);
    const auto it = theta.find(b);
    if (it == theta.end()) throw Error("no level estimate for bucket " + level_label(b) + " (" + describe(my) + ")");
    return it->second;
}

double MRParams::sigma_at(int month) const {
    const int b = period_bucket(month, shape.vol);
    const auto it = sigma.find(b);
    if (it == sigma.end()) throw Error("no volatility estimate for bucket " + period_name(b, shape.vol));
    return it->second;
}

double maximize_profile(const ProfileLikelihood& lik, double lo, double hi) {
    if (!(lo > 0.0 && hi > lo)) throw Error("maximize_profile: invalid bracket");
    auto neg = [&](double u) { return -lik(std::exp(u)); };
    const auto r = boost::math::tools::brent_find_minima(neg, std::log(lo), std::log(hi), 40);
    return std::exp(r.first);
}

namespace {

// Residuals, optionally skipping steps whose buckets carry no estimate.
FactorSeries mr_residuals(const StepSeries& steps, const MRParams& p, std::size_t* skipped) {
    FactorSeries out;
    out.label = steps.label;
    out.points.reserve(steps.pairs.size());
    for (const auto& s : steps.pairs) {
        if (skipped) {
            const bool has_level = p.theta.count(level_bucket(s.bucket, p.shape.level)) > 0;
            const bool has_vol = p.sigma.count(period_bucket(s.month(), p.shape.vol)) > 0;
            if (!has_level || !has_vol) {
                ++*skipped;
                continue;
            }
        }
        const auto c = coefs(p.rate, s.dt);
        const double eps = (s.next - c.eta * s.prev - p.theta_at(s.bucket) * c.kappa) / (p.sigma_at(s.month()) * c.gamma);
        out.points.push_back({s.start, eps});
    }
    return out;
}

template <class Params>
void fill_counts(const StepSeries& steps, Params& p) {
    for (const auto& s : steps.pairs) {
        ++p.level_counts[level_bucket(s.bucket, p.shape.level)];
        ++p.vol_counts[period_bucket(s.month(), p.shape.vol)];
    }
}

template <class Params>
void fill_intervals(Params& p, std::vector<std::string>& diagnostics) {
    for (const auto& [b, sigma] : p.sigma) {
        const auto n = p.vol_counts.at(b);
        if (n < 4) diagnostics.push_back("low count in volatility bucket " + period_name(b, p.shape.vol) + ": N=" + std::to_string(n));
        if (sigma > 0.0 && n >= 2) p.sigma_ci.emplace(b, stats::vol_ci(sigma, n, p.alpha));
    }
    for (const auto& [b, n] : p.vol_counts) {
        if (!p.sigma.count(b)) diagnostics.push_back("volatility bucket " + period_name(b, p.shape.vol) + " dropped: N=" + std::to_string(n));
    }
}

void check_months(const StepSeries& steps, std::vector<std::string>& diagnostics) {
    std::set<MonthYear> seen;
    for (const auto& s : steps.pairs) seen.insert(s.bucket);
    if (seen.size() < 2) diagnostics.push_back("fewer than 2 months of data; estimates are fragile");
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
}

}  // namespace

MRCalibration calibrate(const StepSeries& steps, double daycount, const CalibrationOptions& options) {
    check_alpha(options.alpha);
    if (steps.pairs.size() < 3) throw Error("calibrate: need at least 3 steps, got " + std::to_string(steps.pairs.size()));

    MRCalibration out;
    out.daycount = daycount;
    check_months(steps, out.diagnostics);

    // A constant series has no information about anything; say so plainly
    // before the regression reports something more obscure.
    const auto [lo_it, hi_it] = std::minmax_element(steps.pairs.begin(), steps.pairs.end(),
                                                    [](const Step& x, const Step& y) { return x.next < y.next; });
    if (lo_it->next == hi_it->next && steps.pairs.front().prev == lo_it->next)
        throw Error("calibrate: zero variance in series " + steps.label);

    out.seed = regression_seed(steps, daycount, options.shape.level);
    if (out.seed.fallback)
        out.diagnostics.push_back("regression seed failed (kappa=" + std::to_string(out.seed.kappa) + "); searching from a0=1/yr");

    const ProfileLikelihood lik(steps, options.shape);
    double lo, hi;
    if (out.seed.fallback) {
        lo = 1e-6;
        hi = 500.0;
    } else {
        lo = std::max(1e-6, out.seed.rate / 10.0);
        hi = out.seed.rate * 10.0;
    }

    double a = 0.0;
    for (int widen = 0;; ++widen) {
        a = maximize_profile(lik, lo, hi);
        const double u = std::log(a);
        const bool at_lo = u - std::log(lo) < 1e-6;
        const bool at_hi = std::log(hi) - u < 1e-6;
        if (!at_lo && !at_hi) break;
        if (widen == 3) {
            std::ostringstream os;
            os << "calibrate: likelihood maximum stays on the bracket boundary [" << lo << ", " << hi
               << "] after 3 widenings (best a=" << a << ")";
            throw CalibrationError(os.str(), a);
        }
        if (at_lo) lo /= 10.0;
        if (at_hi) hi *= 10.0;
    }
    out.loglik = lik(a);

    auto& p = out.params;
    p.transform = steps.transform;
    p.shape = options.shape;
    p.alpha = options.alpha;
    p.rate = a;
    if (!out.seed.fallback && std::isfinite(out.seed.stderr_rate))
        p.rate_stderr = stats::mr_ci(a, out.seed.rate, out.seed.stderr_rate);
    p.theta = theta_hat(steps, a, options.shape.level);
    p.sigma = sigma_hat(steps, a, p.theta, options.unbiased, options.shape);
    fill_counts(steps, p);
    for (const auto& [b, s] : p.sigma)
        if (!(s > 0.0)) throw Error("calibrate: zero variance in volatility bucket " + period_name(b, p.shape.vol));
    fill_intervals(p, out.diagnostics);

    std::size_t skipped = 0;
    out.residuals = mr_residuals(steps, p, &skipped);
    if (skipped) out.diagnostics.push_back(std::to_string(skipped) + " steps without bucket estimates left out of residuals");
    out.fit = stats::fit_report(out.residuals.values());
    return out;
}

MRCalibration calibrate(const PriceSeries& series, const CalibrationOptions& options) {
    return calibrate(to_steps(series, options.transform), daycount(series), options);
}

FactorSeries residuals(const StepSeries& steps, const MRParams& params) { return mr_residuals(steps, params, nullptr); }

// ---------------------------------------------------------------------------

double BSParams::mu_at(MonthYear my) const {
    const auto b = level_bucket(my, shape.level);
    const auto it = mu.find(b);
    if (it == mu.end()) throw Error("no drift estimate for bucket " + level_label(b) + " (" + describe(my) + ")");
    return it->second;
}

double BSParams::sigma_at(int month) const {
    const int b = period_bucket(month, shape.vol);
    const auto it = sigma.find(b);
    if (it == sigma.end()) throw Error("no volatility estimate for bucket " + period_name(b, shape.vol));
    return it->second;
}

BSParams bs_calibrate(const StepSeries& steps, TermStructureShape shape, bool unbiased) {
    BSParams p;
    p.transform = steps.transform;
    p.shape = shape;

    std::map<LevelBucket, LevelSums> sums;
    for (const auto& s : steps.pairs) {
        auto& b = sums[level_bucket(s.bucket, shape.level)];
        b.num += s.next - s.prev;
        b.den += s.dt;
    }
    for (const auto& [bucket, b] : sums) p.mu.emplace(bucket, b.num / b.den);

    std::map<int, std::pair<double, std::size_t>> ss;
    for (const auto& s : steps.pairs) {
        const double mu = p.mu.at(level_bucket(s.bucket, shape.level));
        const double r = s.next - s.prev - mu * s.dt;
        auto& acc = ss[period_bucket(s.month(), shape.vol)];
        acc.first += r * r / s.dt;
        ++acc.second;
    }
    const std::size_t u = unbiased ? 1 : 0;
    for (const auto& [bucket, acc] : ss) {
        if (acc.second <= u) continue;
        p.sigma.emplace(bucket, std::sqrt(acc.first / static_cast<double>(acc.second - u)));
    }
    fill_counts(steps, p);
    return p;
}

namespace {

FactorSeries bs_residuals_impl(const StepSeries& steps, const BSParams& p, std::size_t* skipped) {
    FactorSeries out;
    out.label = steps.label;
    out.points.reserve(steps.pairs.size());
    for (const auto& s : steps.pairs) {
        if (skipped) {
            const bool ok = p.mu.count(level_bucket(s.bucket, p.shape.level)) > 0 &&
                            p.sigma.count(period_bucket(s.month(), p.shape.vol)) > 0;
            if (!ok) {
                ++*skipped;
                continue;
            }
        }
        const double eps = (s.next - s.prev - p.mu_at(s.bucket) * s.dt) / (p.sigma_at(s.month()) * std::sqrt(s.dt));
        out.points.push_back({s.start, eps});
    }
    return out;
}

}  // namespace

FactorSeries bs_residuals(const StepSeries& steps, const BSParams& params) {
    return bs_residuals_impl(steps, params, nullptr);
}

BSCalibration calibrate_bs(const StepSeries& steps, const CalibrationOptions& options) {
    check_alpha(options.alpha);
    if (steps.pairs.size() < 3) throw Error("calibrate_bs: need at least 3 steps, got " + std::to_string(steps.pairs.size()));
    BSCalibration out;
    check_months(steps, out.diagnostics);
    out.params = bs_calibrate(steps, options.shape, options.unbiased);
    out.params.alpha = options.alpha;
    for (const auto& [b, s] : out.params.sigma)
        if (!(s > 0.0)) throw Error("calibrate_bs: zero variance in volatility bucket " + period_name(b, options.shape.vol));
    fill_intervals(out.params, out.diagnostics);
    std::size_t skipped = 0;
    out.residuals = bs_residuals_impl(steps, out.params, &skipped);
    if (skipped) out.diagnostics.push_back(std::to_string(skipped) + " steps without bucket estimates left out of residuals");
    out.fit = stats::fit_report(out.residuals.values());
    return out;
}

BSCalibration calibrate_bs(const PriceSeries& series, const CalibrationOptions& options) {
    return calibrate_bs(to_steps(series, options.transform), options);
}

}  // namespace mrcal::mr
