#include "mrcal/spot_prompt.hpp"

#include <array>
#include <cmath>
#include <set>

#include "mrcal/error.hpp"

namespace mrcal::sp {

namespace {

template <class Map>
double lookup(const Map& m, int bucket, PeriodGranularity g, const char* what) {
    const auto it = m.find(bucket);
    if (it == m.end()) throw Error(std::string("no ") + what + " estimate for bucket " + period_label(bucket, g));
    return it->second;
}

double lookup_level(const mr::LevelCurve& m, MonthYear my, LevelGranularity g, const char* what) {
    const auto b = level_bucket(my, g);
    const auto it = m.find(b);
    if (it == m.end()) throw Error(std::string("no ") + what + " estimate for bucket " + level_label(b));
    return it->second;
}

// Per-step innovations on a per-unit-time scale, for one trial rate.
struct Innovations {
    std::vector<double> x;   // quotient innovation / gamma
    std::vector<double> y;   // index innovation / sqrt(dt)
    std::vector<int> month;  // calendar month of the step start
};

// Spot-side estimates for one trial rate.
struct Recovery {
    mr::LevelCurve theta;
    mr::PeriodCurve sigma_q;
    mr::PeriodCurve sigma_S;
    mr::PeriodCurve rho;
    std::map<int, std::size_t> spot_counts;
    std::map<int, std::size_t> corr_counts;
    std::vector<InvalidBucket> invalid;
    std::vector<std::string> notes;
};

class Recoverer {
public:
    Recoverer(const StepSeries& quotient, const StepSeries& log_index, const mr::BSParams& index,
              const SPOptions& options)
        : x_(quotient), y_(log_index), index_(index), opt_(options) {}

    PeriodGranularity spot_granularity() const {
        return nests_within(opt_.corr, opt_.shape.vol) ? opt_.corr : opt_.shape.vol;
    }

    Recovery operator()(double a) const {
        Recovery r;
        r.theta = mr::theta_hat(x_, a, opt_.shape.level);
        r.sigma_q = mr::sigma_hat(x_, a, r.theta, opt_.unbiased, opt_.shape);
        const auto inn = innovations(a, r);

        const auto vol_g = opt_.shape.vol;
        const auto corr_g = opt_.corr;
        std::vector<int> corr_bucket(inn.month.size());
        for (std::size_t k = 0; k < inn.month.size(); ++k) {
            corr_bucket[k] = period_bucket(inn.month[k], corr_g);
            ++r.corr_counts[corr_bucket[k]];
        }

        if (nests_within(corr_g, vol_g)) {
            // Every correlation bucket sits inside one volatility bucket:
            // recover bucket by bucket.
            std::map<int, int> vol_of;
            for (int m : inn.month) vol_of[period_bucket(m, corr_g)] = period_bucket(m, vol_g);
            std::map<int, double> sig_i;
            for (const auto& [c, v] : vol_of) {
                const auto it = index_.sigma.find(v);
                if (it != index_.sigma.end()) sig_i[c] = it->second;
            }
            const auto prod = covar_recover(inn.x, inn.y, corr_bucket, sig_i);
            r.spot_counts = r.corr_counts;
            for (const auto& [c, v] : vol_of) {
                const auto sq = r.sigma_q.find(v);
                const auto si = sig_i.find(c);
                if (sq == r.sigma_q.end() || si == sig_i.end()) {
                    r.invalid.push_back({c, "missing quotient or index volatility"});
                    continue;
                }
                if (si->second == 0.0) {
                    r.sigma_S[c] = sq->second;
                    r.notes.push_back("index volatility is zero in bucket " + period_label(c, corr_g) +
                                      "; correlation unidentifiable");
                    continue;
                }
                const auto p = prod.find(c);
                if (p == prod.end()) {
                    r.invalid.push_back({c, "too few points for covariance"});
                    continue;
                }
                solve_bucket(r, c, sq->second, si->second, p->second);
            }
        } else {
            // Correlation is coarser than volatility: pool each correlation
            // bucket to get rho, then solve sigma_S per volatility bucket from
            // the quadratic sigma^2 = s^2 + sI^2 - 2 s sI rho.
            const double u = opt_.unbiased ? 1.0 : 0.0;
            std::map<int, std::array<double, 3>> pooled;  // sum x^2, sum y^2, n
            for (std::size_t k = 0; k < inn.x.size(); ++k) {
                auto& acc = pooled[corr_bucket[k]];
                acc[0] += inn.x[k] * inn.x[k];
                acc[1] += inn.y[k] * inn.y[k];
                acc[2] += 1.0;
            }
            std::map<int, double> sig_i;
            for (const auto& [c, acc] : pooled)
                if (acc[2] > u) sig_i[c] = std::sqrt(acc[1] / (acc[2] - u));
            const auto prod = covar_recover(inn.x, inn.y, corr_bucket, sig_i);

            std::map<int, double> rho_c;
            for (const auto& [c, acc] : pooled) {
                const auto p = prod.find(c);
                if (p == prod.end() || !(acc[2] > u)) continue;
                const double sq2 = acc[0] / (acc[2] - u);
                const double si = sig_i.at(c);
                const double s2 = sq2 - si * si + 2.0 * p->second * si;
                if (!(s2 > 0.0)) continue;
                const double rho = p->second / std::sqrt(s2);
                if (!(std::abs(rho) <= 1.0)) continue;
                rho_c[c] = rho;
            }

            for (int m : inn.month) ++r.spot_counts[period_bucket(m, vol_g)];
            std::set<int> vols;
            for (int m : inn.month) vols.insert(period_bucket(m, vol_g));
            for (int v : vols) {
                int c = 0;
                for (int m : inn.month)
                    if (period_bucket(m, vol_g) == v) {
                        c = period_bucket(m, corr_g);
                        break;
                    }
                const auto sq = r.sigma_q.find(v);
                const auto si = index_.sigma.find(v);
                const auto rc = rho_c.find(c);
                if (sq == r.sigma_q.end() || si == index_.sigma.end()) {
                    r.invalid.push_back({v, "missing quotient or index volatility"});
                    continue;
                }
                if (si->second == 0.0) {
                    r.sigma_S[v] = sq->second;
                    r.notes.push_back("index volatility is zero in bucket " + period_label(v, vol_g) +
                                      "; correlation unidentifiable");
                    continue;
                }
                if (rc == rho_c.end()) {
                    r.invalid.push_back({v, "pooled correlation bucket " + period_label(c, corr_g) + " is invalid"});
                    continue;
                }
                const double sI = si->second, rho = rc->second, sq2 = sq->second * sq->second;
                const double disc = sq2 - sI * sI * (1.0 - rho * rho);
                if (disc < 0.0) {
                    r.invalid.push_back({v, "no real spot volatility for the pooled correlation"});
                    continue;
                }
                const double s = sI * rho + std::sqrt(disc);
                if (!(s > 0.0)) {
                    r.invalid.push_back({v, "nonpositive spot volatility"});
                    continue;
                }
                r.sigma_S[v] = s;
            }
            for (const auto& [c, rho] : rho_c) r.rho[c] = rho;
        }
        return r;
    }

    Innovations innovations(double a, const Recovery& r) const {
        Innovations inn;
        const std::size_t n = x_.pairs.size();
        inn.x.reserve(n);
        inn.y.reserve(n);
        inn.month.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto& sx = x_.pairs[k];
            const auto& sy = y_.pairs[k];
            const auto th = r.theta.find(level_bucket(sx.bucket, opt_.shape.level));
            const auto mu = index_.mu.find(level_bucket(sy.bucket, opt_.shape.level));
            if (th == r.theta.end() || mu == index_.mu.end()) continue;
            const auto c = mr::coefs(a, sx.dt);
            inn.x.push_back((sx.next - c.eta * sx.prev - th->second * c.kappa) / c.gamma);
            inn.y.push_back((sy.next - sy.prev - mu->second * sy.dt) / std::sqrt(sy.dt));
            inn.month.push_back(sx.month());
        }
        return inn;
    }

private:
    static void solve_bucket(Recovery& r, int c, double sq, double si, double prod) {
        const double s2 = sq * sq - si * si + 2.0 * prod * si;
        if (!(s2 > 0.0)) {
            r.invalid.push_back({c, "negative spot variance"});
            return;
        }
        const double s = std::sqrt(s2);
        const double rho = prod / s;
        if (!(std::abs(rho) <= 1.0)) {
            r.invalid.push_back({c, "correlation outside [-1, 1]"});
            return;
        }
        r.sigma_S[c] = s;
        r.rho[c] = rho;
    }

    const StepSeries& x_;
    const StepSeries& y_;
    const mr::BSParams& index_;
    const SPOptions& opt_;
};

FactorSeries spot_factor_impl(const StepSeries& quotient, const StepSeries& log_index, const SPParams& p,
                              std::size_t* skipped) {
    if (quotient.pairs.size() != log_index.pairs.size())
        throw Error("spot_factor: quotient and index step series differ in length");
    FactorSeries out;
    out.label = quotient.label;
    out.points.reserve(quotient.pairs.size());
    for (std::size_t k = 0; k < quotient.pairs.size(); ++k) {
        const auto& sx = quotient.pairs[k];
        const auto& sy = log_index.pairs[k];
        if (sx.start != sy.start || sx.end != sy.end) throw Error("spot_factor: quotient and index steps are not aligned");
        if (skipped && !p.sigma_S.count(period_bucket(sx.month(), p.spot_granularity))) {
            ++*skipped;
            continue;
        }
        const auto c = mr::coefs(p.rate, sx.dt);
        const double x = (sx.next - c.eta * sx.prev - p.theta_tilde_at(sx.bucket) * c.kappa) / c.gamma;
        const double y = (sy.next - sy.prev - p.mu_at(sy.bucket) * sy.dt) / std::sqrt(sy.dt);
        out.points.push_back({sx.start, (x + y) / p.sigma_S_at(sx.month())});
    }
    return out;
}

FactorSeries index_factor_impl(const StepSeries& log_index, const SPParams& p, std::size_t* skipped) {
    FactorSeries out;
    out.label = log_index.label;
    out.points.reserve(log_index.pairs.size());
    for (const auto& s : log_index.pairs) {
        if (skipped) {
            const auto it = p.sigma_I.find(period_bucket(s.month(), p.shape.vol));
            if (it == p.sigma_I.end() || !(it->second > 0.0)) {
                ++*skipped;
                continue;
            }
        }
        const double eps = (s.next - s.prev - p.mu_at(s.bucket) * s.dt) / (p.sigma_I_at(s.month()) * std::sqrt(s.dt));
        out.points.push_back({s.start, eps});
    }
    return out;
}

}  // namespace

double rho_nu_xi(double a, double dt) {
    if (!(dt > 0.0)) throw Error("rho_nu_xi: dt must be positive");
    if (!(a >= 0.0)) throw Error("rho_nu_xi: rate must be >= 0");
    const double x = a * dt;
    if (x < 1e-8) return 1.0 - x * x / 24.0;
    // 2 (1 - e^-x) / (x (1 + e^-x)) = 2 tanh(x/2) / x
    return std::sqrt(2.0 * std::tanh(0.5 * x) / x);
}

std::map<int, double> covar_recover(std::span<const double> x_innov, std::span<const double> y_innov,
                                    std::span<const int> buckets, const std::map<int, double>& sigma_I) {
    if (x_innov.size() != y_innov.size() || x_innov.size() != buckets.size())
        throw Error("covar_recover: innovation and bucket lengths differ");
    std::map<int, std::array<double, 5>> acc;  // n, sx, sy, sxy, unused
    for (std::size_t k = 0; k < x_innov.size(); ++k) {
        auto& a = acc[buckets[k]];
        a[0] += 1.0;
        a[1] += x_innov[k];
        a[2] += y_innov[k];
        a[3] += x_innov[k] * y_innov[k];
    }
    std::map<int, double> out;
    for (const auto& [b, a] : acc) {
        const auto si = sigma_I.find(b);
        if (si == sigma_I.end() || !(si->second > 0.0) || a[0] < 2.0) continue;
        const double cov = (a[3] - a[1] * a[2] / a[0]) / (a[0] - 1.0);
        out.emplace(b, cov / si->second + si->second);
    }
    return out;
}

double SPParams::theta_tilde_at(MonthYear my) const { return lookup_level(theta_tilde, my, shape.level, "quotient level"); }
double SPParams::mu_at(MonthYear my) const { return lookup_level(mu, my, shape.level, "index drift"); }
double SPParams::sigma_q_at(int month) const {
    return lookup(sigma_q, period_bucket(month, shape.vol), shape.vol, "quotient volatility");
}
double SPParams::sigma_I_at(int month) const {
    return lookup(sigma_I, period_bucket(month, shape.vol), shape.vol, "index volatility");
}
double SPParams::sigma_S_at(int month) const {
    return lookup(sigma_S, period_bucket(month, spot_granularity), spot_granularity, "spot volatility");
}
double SPParams::rho_at(int month) const {
    return lookup(rho, period_bucket(month, corr_granularity), corr_granularity, "spot-index correlation");
}

FactorSeries spot_factor(const StepSeries& quotient, const StepSeries& log_index, const SPParams& params) {
    return spot_factor_impl(quotient, log_index, params, nullptr);
}

FactorSeries index_factor(const StepSeries& log_index, const SPParams& params) {
    return index_factor_impl(log_index, params, nullptr);
}

SPCalibration calibrate_sp(const PriceSeries& spot, const PriceSeries& index, const SPOptions& options) {
    auto [s, i] = align(spot, index);
    if (!s.all_positive() || !i.all_positive()) throw Error("calibrate_sp: spot and index prices must be positive");

    std::vector<Observation> ratio;
    ratio.reserve(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) ratio.push_back({s[k].time, s[k].value / i[k].value});
    const PriceSeries quotient_series(s.label() + "/" + i.label(), std::move(ratio));

    StepSeries xs = to_steps(quotient_series, Transform::Log);
    StepSeries ys = to_steps(i, Transform::Log);
    SPCalibration out;
    if (!options.roll_dates.empty()) {
        const auto before = xs.size();
        xs = drop_steps_spanning(xs, options.roll_dates);
        ys = drop_steps_spanning(ys, options.roll_dates);
        out.diagnostics.push_back(std::to_string(before - xs.size()) + " steps spanning roll dates excluded");
    }

    mr::CalibrationOptions qopt;
    qopt.transform = Transform::Log;
    qopt.shape = options.shape;
    qopt.unbiased = options.unbiased;
    qopt.alpha = options.alpha;
    out.quotient = mr::calibrate(xs, daycount(s), qopt);
    for (const auto& d : out.quotient.diagnostics) out.diagnostics.push_back("quotient: " + d);

    const auto bs = mr::bs_calibrate(ys, options.shape, options.unbiased);
    const Recoverer recover(xs, ys, bs, options);
    const double a = out.quotient.params.rate;
    const auto rec = recover(a);

    auto& p = out.params;
    p.shape = options.shape;
    p.corr_granularity = options.corr;
    p.spot_granularity = recover.spot_granularity();
    p.alpha = options.alpha;
    p.rate = a;
    p.rate_stderr = out.quotient.params.rate_stderr;
    p.theta_tilde = out.quotient.params.theta;
    p.sigma_q = out.quotient.params.sigma;
    p.sigma_q_ci = out.quotient.params.sigma_ci;
    p.mu = bs.mu;
    p.sigma_I = bs.sigma;
    p.sigma_S = rec.sigma_S;
    p.rho = rec.rho;
    p.level_counts = out.quotient.params.level_counts;
    p.vol_counts = out.quotient.params.vol_counts;
    p.spot_counts = rec.spot_counts;
    p.corr_counts = rec.corr_counts;
    p.invalid = rec.invalid;
    for (const auto& note : rec.notes) out.diagnostics.push_back(note);
    for (const auto& bad : rec.invalid)
        out.diagnostics.push_back("invalid spot bucket " + period_label(bad.bucket, p.spot_granularity) + ": " + bad.reason);

    for (const auto& [b, sI] : p.sigma_I) {
        const auto n = bs.vol_counts.at(b);
        if (sI > 0.0 && n >= 2) p.sigma_I_ci.emplace(b, stats::vol_ci(sI, n, options.alpha));
    }

    // sigma_S and rho inherit the uncertainty of the rate; widen their
    // intervals by the delta method with central differences in a.
    std::optional<Recovery> up, dn;
    double h = 0.0;
    if (p.rate_stderr) {
        h = 1e-4 * a;
        up = recover(a + h);
        dn = recover(a - h);
    }
    for (const auto& [b, sS] : p.sigma_S) {
        const auto n = p.spot_counts.at(b);
        if (n < 2) continue;
        auto ci = stats::vol_ci(sS, n, options.alpha);
        if (up && up->sigma_S.count(b) && dn->sigma_S.count(b))
            ci = stats::widen_vol_for_rate(ci, (up->sigma_S.at(b) - dn->sigma_S.at(b)) / (2.0 * h), *p.rate_stderr);
        p.sigma_S_ci.emplace(b, ci);
    }
    for (const auto& [c, rho] : p.rho) {
        const auto n = p.corr_counts.at(c);
        if (n < 4 || !(std::abs(rho) < 1.0)) continue;
        auto ci = stats::corr_ci(rho, n, options.alpha);
        if (up && up->rho.count(c) && dn->rho.count(c))
            ci = stats::widen_corr_for_rate(ci, (up->rho.at(c) - dn->rho.at(c)) / (2.0 * h), *p.rate_stderr);
        p.rho_ci.emplace(c, ci);
    }

    std::size_t skipped = 0;
    out.spot_factor = spot_factor_impl(xs, ys, p, &skipped);
    out.spot_factor.label = s.label();
    if (skipped) out.diagnostics.push_back(std::to_string(skipped) + " steps in invalid spot buckets left out of the spot factor");
    skipped = 0;
    out.index_factor = index_factor_impl(ys, p, &skipped);
    out.index_factor.label = i.label();
    if (skipped) out.diagnostics.push_back(std::to_string(skipped) + " steps with zero index volatility left out of the index factor");
    if (out.spot_factor.size() >= 8) out.spot_fit = stats::fit_report(out.spot_factor.values());
    if (out.index_factor.size() >= 8) out.index_fit = stats::fit_report(out.index_factor.values());
    return out;
}

}  // namespace mrcal::sp
