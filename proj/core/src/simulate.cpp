#include "mrcal/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "mrcal/error.hpp"
#include "mrcal/random.hpp"

namespace mrcal::sim {

namespace chr = std::chrono;

namespace {

constexpr double kMinutesPerYear = 365.0 * 24.0 * 60.0;

Timestamp next_month_start(Timestamp t) {
    const auto ymd = civil_date(t);
    const auto ym = chr::year_month{ymd.year(), ymd.month()} + chr::months{1};
    return chr::time_point_cast<chr::minutes>(chr::sys_days{ym / chr::day{1}});
}

// Calls f(u0, u1, month) for the calendar-month pieces of [t0, t1].
template <class F>
void for_each_month_piece(Timestamp t0, Timestamp t1, F&& f) {
    Timestamp u = t0;
    while (u < t1) {
        const Timestamp next = std::min(next_month_start(u), t1);
        f(u, next, static_cast<int>(static_cast<unsigned>(civil_date(u).month())));
        u = next;
    }
}

// integral over tau in [tau0, tau1] of e^{-k tau}.
double exp_integral(double k, double tau0, double tau1) {
    const double len = tau1 - tau0;
    if (len <= 0.0) return 0.0;
    const double x = k * len;
    if (std::abs(x) < 1e-12) return len * std::exp(-k * tau0) * (1.0 - 0.5 * x);
    return std::exp(-k * tau0) * (-std::expm1(-x)) / k;
}

void check_grid(const std::vector<Timestamp>& grid) {
    if (grid.empty()) throw Error("simulation grid is empty");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > grid[k - 1])) throw Error("simulation grid must be strictly increasing");
}

void check_paths(std::size_t n) {
    if (n < 1) throw Error("number of paths must be at least 1");
}

std::size_t month_index(Timestamp t) { return static_cast<unsigned>(civil_date(t).month()) - 1; }

}  // namespace

MonthlyCurve flat_curve(double value) {
    MonthlyCurve c;
    c.fill(value);
    return c;
}

MonthlyCurve expand(const mr::PeriodCurve& curve, PeriodGranularity g) {
    MonthlyCurve out{};
    for (int m = 1; m <= 12; ++m) {
        const int b = period_bucket(m, g);
        const auto it = curve.find(b);
        if (it == curve.end()) throw Error("term structure has no value for bucket " + period_label(b, g));
        out[static_cast<std::size_t>(m - 1)] = it->second;
    }
    return out;
}

double years_since(Timestamp origin, Timestamp t) {
    return static_cast<double>((t - origin).count()) / kMinutesPerYear;
}

// ---------------------------------------------------------------------------

ForwardCurve::ForwardCurve(std::vector<Knot> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) throw Error("forward curve needs at least one knot");
    for (std::size_t k = 0; k < knots_.size(); ++k) {
        if (!(knots_[k].price > 0.0) || !std::isfinite(knots_[k].price))
            throw Error("forward curve price at " + format_timestamp(knots_[k].expiry) + " must be positive");
        if (k > 0 && !(knots_[k].expiry > knots_[k - 1].expiry))
            throw Error("forward curve expiries must be strictly increasing");
    }
}

ForwardCurve ForwardCurve::flat(Timestamp start, double price) { return ForwardCurve({{start, price}}); }

double ForwardCurve::operator()(Timestamp t) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                     [](Timestamp v, const Knot& k) { return v < k.expiry; });
    if (it == knots_.begin()) throw Error("time " + format_timestamp(t) + " precedes the forward curve start");
    return std::prev(it)->price;
}

ForwardCurve load_curve_csv(const std::filesystem::path& path) {
    const auto series = load_csv(path);
    std::vector<ForwardCurve::Knot> knots;
    for (const auto& o : series.observations()) knots.push_back({o.time, o.value});
    return ForwardCurve(std::move(knots));
}

double v_squared(double a, const MonthlyCurve& sigma, Timestamp t0, Timestamp t1) {
    if (!(t1 > t0)) throw Error("v_squared: need t0 < t1");
    if (!(a >= 0.0)) throw Error("v_squared: rate must be >= 0");
    double total = 0.0;
    for_each_month_piece(t0, t1, [&](Timestamp u0, Timestamp u1, int m) {
        const double s = sigma[static_cast<std::size_t>(m - 1)];
        total += s * s * exp_integral(2.0 * a, years_since(u1, t1), years_since(u0, t1));
    });
    return total;
}

double forward_curve_evolve(const ForwardCurve& F0, double spot, Timestamp origin, Timestamp t, Timestamp T,
                            double a, const MonthlyCurve& sigma) {
    if (t < origin || T < t) throw Error("forward_curve_evolve: need origin <= t <= T");
    const double f0t = F0(t);
    if (!(f0t > 0.0)) throw Error("forward_curve_evolve: F(0,t) must be positive");
    const double v2 = t > origin ? v_squared(a, sigma, origin, t) : 0.0;
    const double e = std::exp(-a * years_since(t, T));
    return F0(T) * std::exp(0.5 * (1.0 - e) * e * v2) * std::pow(spot / f0t, e);
}

// ---------------------------------------------------------------------------

PriceSeries Paths::path_series(std::size_t path, std::string label) const {
    std::vector<Observation> obs;
    obs.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) obs.push_back({grid[k], (*this)(path, k)});
    return PriceSeries(std::move(label), std::move(obs));
}

std::optional<GridFrequency> parse_grid_frequency(std::string_view text) {
    if (text == "daily") return GridFrequency::Daily;
    if (text == "weekdays" || text == "business") return GridFrequency::Weekdays;
    if (text == "weekly") return GridFrequency::Weekly;
    if (text == "monthly") return GridFrequency::Monthly;
    return std::nullopt;
}

std::string_view to_string(GridFrequency f) {
    switch (f) {
        case GridFrequency::Daily: return "daily";
        case GridFrequency::Weekdays: return "weekdays";
        case GridFrequency::Weekly: return "weekly";
        case GridFrequency::Monthly: return "monthly";
    }
    return "?";
}

bool is_weekday(Timestamp t) {
    const chr::weekday wd{chr::floor<chr::days>(t)};
    return wd != chr::Saturday && wd != chr::Sunday;
}

std::vector<Timestamp> make_grid(Timestamp start, Timestamp end, GridFrequency freq) {
    if (end < start) throw Error("grid end precedes grid start");
    std::vector<Timestamp> out;
    if (freq == GridFrequency::Monthly) {
        const auto ymd = civil_date(start);
        const auto time_of_day = start - chr::floor<chr::days>(start);
        for (int k = 0;; ++k) {
            const auto ym = chr::year_month{ymd.year(), ymd.month()} + chr::months{k};
            const auto last = chr::year_month_day_last{ym.year(), chr::month_day_last{ym.month()}}.day();
            const auto day = std::min(ymd.day(), last);
            const Timestamp t = chr::time_point_cast<chr::minutes>(chr::sys_days{ym / day}) + time_of_day;
            if (t > end) break;
            out.push_back(t);
        }
        return out;
    }
    const auto step = freq == GridFrequency::Weekly ? chr::days{7} : chr::days{1};
    for (Timestamp t = start; t <= end; t += step) {
        if (freq == GridFrequency::Weekdays && !is_weekday(t)) continue;
        out.push_back(t);
    }
    return out;
}

std::vector<Timestamp> default_roll_dates(Timestamp start, Timestamp end, int k) {
    if (k < 1) throw Error("default_roll_dates: k must be at least 1");
    std::vector<Timestamp> out;
    const auto ymd = civil_date(start);
    for (int m = 0;; ++m) {
        const auto ym = chr::year_month{ymd.year(), ymd.month()} + chr::months{m};
        chr::sys_days d{ym / chr::day{1}};
        int found = 0;
        while (found < k) {
            d -= chr::days{1};
            const chr::weekday wd{d};
            if (wd != chr::Saturday && wd != chr::Sunday) ++found;
        }
        const Timestamp roll = chr::time_point_cast<chr::minutes>(d);
        if (roll <= start) continue;
        out.push_back(roll);
        if (roll > end) break;
    }
    return out;
}

// ---------------------------------------------------------------------------

Paths simulate_mr(const MRRiskNeutralSpec& spec) {
    check_grid(spec.grid);
    check_paths(spec.n_paths);
    if (!spec.curve) throw Error("risk-neutral simulation needs a forward curve");
    if (!(spec.a >= 0.0)) throw Error("simulate_mr: rate must be >= 0");

    const auto& grid = spec.grid;
    const std::size_t n = grid.size();
    std::vector<double> fwd(n), eta(n, 1.0), sd(n, 0.0), v2(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        fwd[k] = (*spec.curve)(grid[k]);
        if (k == 0) continue;
        eta[k] = std::exp(-spec.a * years_since(grid[k - 1], grid[k]));
        const double step_var = v_squared(spec.a, spec.sigma, grid[k - 1], grid[k]);
        sd[k] = std::sqrt(step_var);
        v2[k] = eta[k] * eta[k] * v2[k - 1] + step_var;
    }

    Paths out;
    out.grid = grid;
    out.n_paths = spec.n_paths;
    out.values.resize(spec.n_paths * n);
    const bool log_model = spec.transform == Transform::Log;
    for (std::size_t p = 0; p < spec.n_paths; ++p) {
        auto rng = path_stream(spec.seed, p);
        NormalSampler normal;
        double z = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k > 0) z = eta[k] * z + sd[k] * normal(rng);
            out(p, k) = log_model ? fwd[k] * std::exp(-0.5 * v2[k] + z) : fwd[k] + z;
        }
    }
    return out;
}

Paths simulate_mr_realworld(const mr::MRParams& params, double start_price, const RealWorldOptions& opt) {
    check_grid(opt.grid);
    check_paths(opt.n_paths);
    const bool log_model = params.transform == Transform::Log;
    if (log_model && !(start_price > 0.0)) throw Error("lognormal simulation needs a positive start price");

    const auto& grid = opt.grid;
    const std::size_t n = grid.size();
    std::vector<double> drift(n, 0.0), eta(n, 1.0), scale(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) {
        const auto c = mr::coefs(params.rate, years_since(grid[k - 1], grid[k]));
        const auto my = month_year(grid[k - 1]);
        eta[k] = c.eta;
        drift[k] = params.theta_at(my) * c.kappa;
        scale[k] = params.sigma_at(my.month) * c.gamma;
    }

    Paths out;
    out.grid = grid;
    out.n_paths = opt.n_paths;
    out.values.resize(opt.n_paths * n);
    if (opt.draws) opt.draws->assign(opt.n_paths * (n - 1), 0.0);
    const double x0 = log_model ? std::log(start_price) : start_price;
    for (std::size_t p = 0; p < opt.n_paths; ++p) {
        auto rng = path_stream(opt.seed, p);
        NormalSampler normal;
        double x = x0;
        out(p, 0) = start_price;
        for (std::size_t k = 1; k < n; ++k) {
            const double eps = normal(rng);
            if (opt.draws) (*opt.draws)[p * (n - 1) + k - 1] = eps;
            x = eta[k] * x + drift[k] + scale[k] * eps;
            out(p, k) = log_model ? std::exp(x) : x;
        }
    }
    return out;
}

mr::MRParams as_one_factor(const mr::BSParams& bs) {
    mr::MRParams p;
    p.transform = bs.transform;
    p.shape = bs.shape;
    p.rate = 0.0;
    p.theta = bs.mu;
    p.sigma = bs.sigma;
    p.sigma_ci = bs.sigma_ci;
    p.level_counts = bs.level_counts;
    p.vol_counts = bs.vol_counts;
    p.alpha = bs.alpha;
    return p;
}

// ---------------------------------------------------------------------------
// Spot-Prompt.

double sp_theta(double a, const SPCurves& c, Timestamp Ti, Timestamp t, Timestamp T_next) {
    if (!(a > 0.0)) throw Error("sp_theta: rate must be positive");
    if (t < Ti || !(t < T_next)) throw Error("sp_theta: t must lie in [T_i, T_{i+1})");
    double v = 0.0;
    for_each_month_piece(Ti, t, [&](Timestamp u0, Timestamp u1, int m) {
        const auto i = static_cast<std::size_t>(m - 1);
        const double s2 = c.sigma_S[i] * c.sigma_S[i] + c.sigma_I[i] * c.sigma_I[i] -
                          2.0 * c.sigma_S[i] * c.sigma_I[i] * c.rho[i];
        v += s2 * years_since(u0, u1);
    });
    const double sS = c.sigma_S[month_index(t)];
    return 0.5 * v - sS * sS / (2.0 * a);
}

namespace {

// Second moments of (G1, G2) over [u_start, u_end] for the prompt expiring at
// `prompt` (years since origin), where
//   G1 = int sigma_I dB,  G2 = int e^{-a(t-u)} (sigma_S dW - sigma_I dB),
//   sigma_I(u) = e^{-b(prompt-u)} sigmabar(u), t = u_end.
struct StepMoments {
    double h = 0.0;    // Var G1
    double var2 = 0.0;  // Var G2
    double cov = 0.0;  // Cov(G1, G2)
};

StepMoments step_moments(double a, double b, const SPCurves& c, Timestamp origin, double prompt, Timestamp u_start,
                         Timestamp u_end) {
    StepMoments m;
    if (!(u_end > u_start)) return m;
    const double t = years_since(origin, u_end);
    const double beta = std::exp(-b * (prompt - t));
    for_each_month_piece(u_start, u_end, [&](Timestamp u0, Timestamp u1, int month) {
        const auto i = static_cast<std::size_t>(month - 1);
        const double tau0 = years_since(u1, u_end);
        const double tau1 = years_since(u0, u_end);
        const double sS = c.sigma_S[i], sB = c.sigma_I[i] * beta, r = c.rho[i];
        m.h += sB * sB * exp_integral(2.0 * b, tau0, tau1);
        const double va = sS * sS * exp_integral(2.0 * a, tau0, tau1);
        const double vx = sB * sB * exp_integral(2.0 * a + 2.0 * b, tau0, tau1);
        const double cax = sS * sB * r * exp_integral(2.0 * a + b, tau0, tau1);
        m.var2 += va + vx - 2.0 * cax;
        m.cov += sS * sB * r * exp_integral(a + b, tau0, tau1) - sB * sB * exp_integral(a + 2.0 * b, tau0, tau1);
    });
    return m;
}

// integral over [t0, t1] of e^{2bu} sigmabar(u)^2 du, u in years since origin.
double damped_variance(double b, const MonthlyCurve& sigmabar, Timestamp origin, Timestamp t0, Timestamp t1) {
    double total = 0.0;
    for_each_month_piece(t0, t1, [&](Timestamp u0, Timestamp u1, int month) {
        const double s = sigmabar[static_cast<std::size_t>(month - 1)];
        total += s * s * std::exp(2.0 * b * years_since(origin, u1)) * exp_integral(2.0 * b, 0.0, years_since(u0, u1));
    });
    return total;
}

}  // namespace

SPPaths simulate_sp(const SPRiskNeutralSpec& spec) {
    check_grid(spec.grid);
    check_paths(spec.n_paths);
    if (!spec.curve) throw Error("risk-neutral simulation needs a forward curve");
    if (!(spec.a >= 0.0) || !(spec.b >= 0.0)) throw Error("simulate_sp: rates a and b must be >= 0");
    for (std::size_t i = 0; i < 12; ++i)
        if (std::abs(spec.curves.rho[i]) > 1.0) throw Error("simulate_sp: |rho| must not exceed 1");

    const auto& grid = spec.grid;
    const Timestamp origin = grid.front();
    const Timestamp last = grid.back();
    const auto& F0 = *spec.curve;

    std::vector<Timestamp> rolls = spec.roll_dates.empty() ? default_roll_dates(origin, last) : spec.roll_dates;
    std::sort(rolls.begin(), rolls.end());
    if (std::adjacent_find(rolls.begin(), rolls.end()) != rolls.end()) throw Error("simulate_sp: duplicate roll dates");
    rolls.erase(rolls.begin(), std::upper_bound(rolls.begin(), rolls.end(), origin));
    const auto after_end = std::upper_bound(rolls.begin(), rolls.end(), last);
    if (after_end == rolls.end())
        throw Error("simulate_sp: roll dates must extend past the grid end (the last window needs its prompt expiry)");
    rolls.erase(after_end + 1, rolls.end());
    const std::size_t n_rolls = rolls.size() - 1;  // rolls inside (origin, last]

    // Internal time line: the output grid merged with the rolls.
    struct Node {
        Timestamp t;
        std::ptrdiff_t grid_index = -1;
        bool roll = false;
    };
    std::vector<Node> nodes;
    {
        std::size_t g = 0, r = 0;
        while (g < grid.size() || r < n_rolls) {
            if (r < n_rolls && (g == grid.size() || rolls[r] < grid[g])) {
                nodes.push_back({rolls[r++], -1, true});
            } else if (r < n_rolls && rolls[r] == grid[g]) {
                nodes.push_back({grid[g], static_cast<std::ptrdiff_t>(g), true});
                ++g;
                ++r;
            } else {
                nodes.push_back({grid[g], static_cast<std::ptrdiff_t>(g), false});
                ++g;
            }
        }
    }

    // Window w covers [T_w, T_{w+1}) with T_0 = origin; its prompt expires at
    // T_{w+1} = rolls[w].
    const std::size_t n_windows = n_rolls + 1;
    std::vector<double> prompt_years(n_windows), log_f0(n_windows + 1);
    log_f0[0] = std::log(F0(origin));
    for (std::size_t w = 0; w < n_windows; ++w) {
        prompt_years[w] = years_since(origin, rolls[w]);
        log_f0[w + 1] = std::log(F0(rolls[w]));
    }

    struct StepPlan {
        double eta = 1.0, cq = 0.0, drift = 0.0, half_h = 0.0;
        double l11 = 0.0, l21 = 0.0, l22 = 0.0;
        double g_scale = 1.0;
    };
    std::vector<StepPlan> plan(nodes.size());
    // At each roll: deterministic part of the jump in log prompt.
    std::vector<double> roll_shift(n_rolls, 0.0), roll_g(n_rolls, 0.0);
    {
        std::size_t w = 0;
        Timestamp window_start = origin;
        double k_prev = 0.0;  // K(T_w, s) = Var G2 + 2 Cov over [T_w, s]
        for (std::size_t j = 1; j < nodes.size(); ++j) {
            const Timestamp s = nodes[j - 1].t, t = nodes[j].t;
            auto& sp = plan[j];
            const double dt = years_since(s, t);
            sp.eta = std::exp(-spec.a * dt);
            sp.cq = 1.0 - sp.eta;
            const auto step = step_moments(spec.a, spec.b, spec.curves, origin, prompt_years[w], s, t);
            const auto cum = step_moments(spec.a, spec.b, spec.curves, origin, prompt_years[w], window_start, t);
            const double k_now = cum.var2 + 2.0 * cum.cov;
            sp.drift = -0.5 * (k_now - sp.eta * k_prev);
            sp.half_h = 0.5 * step.h;
            sp.l11 = std::sqrt(step.h);
            sp.l21 = sp.l11 > 0.0 ? step.cov / sp.l11 : 0.0;
            sp.l22 = std::sqrt(std::max(0.0, step.var2 - sp.l21 * sp.l21));
            sp.g_scale = std::exp(spec.b * prompt_years[w]);
            k_prev = k_now;
            if (nodes[j].roll) {
                const double p_old = prompt_years[w], p_new = prompt_years[w + 1];
                const double htilde = spec.b > 0.0 ? damped_variance(spec.b, spec.curves.sigma_I, origin, origin, t) : 0.0;
                roll_shift[w] = log_f0[w + 2] - log_f0[w + 1] -
                                0.5 * (std::exp(-2.0 * spec.b * p_new) - std::exp(-2.0 * spec.b * p_old)) * htilde;
                roll_g[w] = std::exp(-spec.b * p_new) - std::exp(-spec.b * p_old);
                ++w;
                window_start = t;
                k_prev = 0.0;
            }
        }
    }

    SPPaths out;
    out.spot.grid = out.index.grid = grid;
    out.spot.n_paths = out.index.n_paths = spec.n_paths;
    out.spot.values.resize(spec.n_paths * grid.size());
    out.index.values.resize(spec.n_paths * grid.size());
    out.rolls.assign(rolls.begin(), rolls.begin() + static_cast<std::ptrdiff_t>(n_rolls));
    out.index_at_roll.resize(spec.n_paths * n_rolls);

    for (std::size_t p = 0; p < spec.n_paths; ++p) {
        auto rng = path_stream(spec.seed, p);
        NormalSampler normal;
        double y = log_f0[1];
        double q = log_f0[0] - y;
        double q_start = q;
        double g_tilde = 0.0;
        std::size_t w = 0;
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            if (j > 0) {
                const auto& sp = plan[j];
                const double z1 = normal(rng), z2 = normal(rng);
                const double g1 = sp.l11 * z1;
                const double g2 = sp.l21 * z1 + sp.l22 * z2;
                y += -sp.half_h + g1;
                q = sp.eta * q + sp.cq * q_start + sp.drift + g2;
                g_tilde += sp.g_scale * g1;
                if (nodes[j].roll) {
                    // The spot lands on the expiring contract; the prompt
                    // moves to the next one.
                    out.index_at_roll[p * n_rolls + w] = std::exp(y);
                    const double y_new = y + roll_shift[w] + roll_g[w] * g_tilde;
                    q_start = q = y - y_new;
                    y = y_new;
                    ++w;
                }
            }
            if (nodes[j].grid_index >= 0) {
                const auto g = static_cast<std::size_t>(nodes[j].grid_index);
                out.spot(p, g) = std::exp(y + q);
                out.index(p, g) = std::exp(y);
            }
        }
    }
    return out;
}

PrintedMoments sp_printed_moments(double a, const SPCurves& c, Timestamp Ti, Timestamp s, Timestamp t,
                                  double log_spot_s, double log_index_s) {
    if (!(Ti <= s && s < t)) throw Error("sp_printed_moments: need T_i <= s < t");
    auto big_v = [&](Timestamp u_start, Timestamp u_end) {
        double v = 0.0;
        for_each_month_piece(u_start, u_end, [&](Timestamp u0, Timestamp u1, int m) {
            const auto i = static_cast<std::size_t>(m - 1);
            v += (c.sigma_S[i] * c.sigma_S[i] + c.sigma_I[i] * c.sigma_I[i] -
                  2.0 * c.sigma_S[i] * c.sigma_I[i] * c.rho[i]) *
                 years_since(u0, u1);
        });
        return v;
    };
    double int_i2 = 0.0, int_cross = 0.0;
    for_each_month_piece(s, t, [&](Timestamp u0, Timestamp u1, int m) {
        const auto i = static_cast<std::size_t>(m - 1);
        const double len = years_since(u0, u1);
        int_i2 += c.sigma_I[i] * c.sigma_I[i] * len;
        int_cross += (c.sigma_I[i] * c.sigma_I[i] - c.sigma_I[i] * c.sigma_S[i] * c.rho[i]) * len;
    });
    const double e = std::exp(-a * years_since(s, t));
    PrintedMoments m;
    // The display puts e^{-a(t-s)} (not e^{-a(t-u)}) inside the integral.
    m.variance = int_i2 - 2.0 * e * int_cross + big_v(s, t);
    m.mean = e * log_spot_s + (1.0 - e) * log_index_s - 0.5 * big_v(Ti, t) +
             0.5 * e * (s > Ti ? big_v(Ti, s) : 0.0) + 0.5 * big_v(s, t) - 0.5 * m.variance;
    return m;
}

SPRealWorldOutput simulate_sp_realworld(const sp::SPParams& params, double spot0, double index0,
                                        const RealWorldOptions& opt) {
    check_grid(opt.grid);
    check_paths(opt.n_paths);
    if (!(spot0 > 0.0) || !(index0 > 0.0)) throw Error("simulate_sp_realworld: start prices must be positive");
    const auto& grid = opt.grid;
    const std::size_t n = grid.size();

    struct StepPlan {
        double eta, x_drift, y_drift, sS, sI, rho, gamma, kappa_over_sqrt_dt, bx_resid, sqrt_dt;
    };
    std::vector<StepPlan> plan(n);
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = years_since(grid[k - 1], grid[k]);
        const auto c = mr::coefs(params.rate, dt);
        const auto my = month_year(grid[k - 1]);
        auto& sp = plan[k];
        sp.eta = c.eta;
        sp.x_drift = params.theta_tilde_at(my) * c.kappa;
        sp.y_drift = params.mu_at(my) * dt;
        sp.sS = params.sigma_S_at(my.month);
        sp.sI = params.sigma_I_at(my.month);
        sp.rho = params.rho_at(my.month);
        sp.gamma = c.gamma;
        sp.sqrt_dt = std::sqrt(dt);
        sp.kappa_over_sqrt_dt = c.kappa / sp.sqrt_dt;
        sp.bx_resid = std::sqrt(std::max(0.0, c.gamma * c.gamma - c.kappa * c.kappa / dt));
    }

    SPRealWorldOutput out;
    out.spot.grid = out.index.grid = grid;
    out.spot.n_paths = out.index.n_paths = opt.n_paths;
    out.spot.values.resize(opt.n_paths * n);
    out.index.values.resize(opt.n_paths * n);
    out.spot_draws.resize(opt.n_paths * (n - 1));
    out.index_draws.resize(opt.n_paths * (n - 1));
    for (std::size_t p = 0; p < opt.n_paths; ++p) {
        auto rng = path_stream(opt.seed, p);
        NormalSampler normal;
        double x = std::log(spot0 / index0), y = std::log(index0);
        out.spot(p, 0) = spot0;
        out.index(p, 0) = index0;
        for (std::size_t k = 1; k < n; ++k) {
            const auto& sp = plan[k];
            const double z1 = normal(rng), z2 = normal(rng), z3 = normal(rng);
            // bd = int dB, bx = int e^{-a(t-u)} dB, aw = int e^{-a(t-u)} dW.
            const double bd = sp.sqrt_dt * z1;
            const double bx = sp.kappa_over_sqrt_dt * z1 + sp.bx_resid * z2;
            const double aw = sp.rho * bx + std::sqrt(1.0 - sp.rho * sp.rho) * sp.gamma * z3;
            x = sp.eta * x + sp.x_drift + sp.sS * aw - sp.sI * bx;
            y = y + sp.y_drift + sp.sI * bd;
            out.spot(p, k) = std::exp(x + y);
            out.index(p, k) = std::exp(y);
            out.spot_draws[p * (n - 1) + k - 1] = aw / sp.gamma;
            out.index_draws[p * (n - 1) + k - 1] = z1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Joint.

std::size_t factor_count(const std::vector<JointMember>& members) {
    std::size_t n = 0;
    for (const auto& m : members) n += m.kind == joint::ModelKind::SP ? 2 : 1;
    return n;
}

namespace {

Eigen::MatrixXd to_matrix(const std::vector<double>& v, std::size_t dim) {
    Eigen::MatrixXd m(dim, dim);
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) m(r, c) = v[r * dim + c];
    return m;
}

}  // namespace

bool repair_correlation(std::vector<double>& matrix, std::size_t dim, double* min_eigenvalue) {
    if (matrix.size() != dim * dim) throw Error("repair_correlation: matrix size does not match dimension");
    Eigen::MatrixXd m = to_matrix(matrix, dim);
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double lo = es.eigenvalues().minCoeff();
    if (min_eigenvalue) *min_eigenvalue = lo;
    if (lo >= 0.0) return false;
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd fixed = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd d = fixed.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    fixed = d.asDiagonal() * fixed * d.asDiagonal();
    fixed = 0.5 * (fixed + fixed.transpose());
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = 0; c < dim; ++c) matrix[r * dim + c] = r == c ? 1.0 : fixed(r, c);
    }
    return true;
}

JointPaths simulate_joint(const JointSpec& spec) {
    check_grid(spec.grid);
    check_paths(spec.n_paths);
    if (spec.members.empty()) throw Error("simulate_joint: no members");
    const std::size_t dim = factor_count(spec.members);
    const auto& grid = spec.grid;
    const std::size_t n = grid.size();

    JointPaths out;
    // Factor loadings per bucket: L with L L^T = (repaired) correlation.
    std::map<int, Eigen::MatrixXd> loadings;
    for (int b : period_buckets(spec.granularity)) {
        const auto it = spec.matrices.find(b);
        if (it == spec.matrices.end())
            throw Error("simulate_joint: no correlation matrix for bucket " + period_label(b, spec.granularity));
        if (it->second.size() != dim * dim)
            throw Error("simulate_joint: correlation matrix for bucket " + period_label(b, spec.granularity) + " is not " +
                        std::to_string(dim) + "x" + std::to_string(dim));
        auto m = it->second;
        double lo = 0.0;
        if (repair_correlation(m, dim, &lo)) out.repairs.push_back({b, lo});
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_matrix(m, dim));
        loadings[b] = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    // Per-member step plans.
    struct MemberPlan {
        std::vector<double> eta, drift, scale, y_drift, y_scale, cross;
    };
    std::vector<MemberPlan> plans(spec.members.size());
    std::vector<std::size_t> first_factor(spec.members.size());
    std::size_t f = 0;
    for (std::size_t i = 0; i < spec.members.size(); ++i) {
        const auto& m = spec.members[i];
        first_factor[i] = f;
        f += m.kind == joint::ModelKind::SP ? 2 : 1;
        auto& pl = plans[i];
        for (auto* v : {&pl.eta, &pl.drift, &pl.scale, &pl.y_drift, &pl.y_scale, &pl.cross}) v->assign(n, 0.0);
        for (std::size_t k = 1; k < n; ++k) {
            const double dt = years_since(grid[k - 1], grid[k]);
            const auto my = month_year(grid[k - 1]);
            if (m.kind == joint::ModelKind::SP) {
                const auto& p = m.spot_prompt;
                const auto c = mr::coefs(p.rate, dt);
                pl.eta[k] = c.eta;
                pl.drift[k] = p.theta_tilde_at(my) * c.kappa;
                pl.scale[k] = p.sigma_S_at(my.month) * c.gamma;
                pl.cross[k] = p.sigma_I_at(my.month) * c.gamma;
                pl.y_drift[k] = p.mu_at(my) * dt;
                pl.y_scale[k] = p.sigma_I_at(my.month) * std::sqrt(dt);
            } else {
                const auto& p = m.one_factor;
                const double rate = m.kind == joint::ModelKind::BS ? 0.0 : p.rate;
                const auto c = mr::coefs(rate, dt);
                pl.eta[k] = c.eta;
                pl.drift[k] = p.theta_at(my) * c.kappa;
                pl.scale[k] = p.sigma_at(my.month) * c.gamma;
            }
        }
        if (m.kind == joint::ModelKind::SP) {
            out.labels.push_back(m.label);
            out.labels.push_back(m.label + ".index");
            out.factor_names.push_back(m.label + ":W");
            out.factor_names.push_back(m.label + ":B");
        } else {
            out.labels.push_back(m.label);
            out.factor_names.push_back(m.label + ":W");
        }
    }

    out.series.resize(out.labels.size());
    for (auto& s : out.series) {
        s.grid = grid;
        s.n_paths = spec.n_paths;
        s.values.resize(spec.n_paths * n);
    }
    if (spec.store_draws) out.draws.assign(dim, std::vector<double>(spec.n_paths * (n - 1), 0.0));

    std::vector<const Eigen::MatrixXd*> step_loading(n, nullptr);
    for (std::size_t k = 1; k < n; ++k)
        step_loading[k] = &loadings.at(period_bucket(month_year(grid[k - 1]).month, spec.granularity));

    Eigen::VectorXd e(static_cast<Eigen::Index>(dim)), z(static_cast<Eigen::Index>(dim));
    std::vector<double> x(spec.members.size()), y(spec.members.size());
    for (std::size_t p = 0; p < spec.n_paths; ++p) {
        auto rng = path_stream(spec.seed, p);
        NormalSampler normal;
        std::size_t s = 0;
        for (std::size_t i = 0; i < spec.members.size(); ++i) {
            const auto& m = spec.members[i];
            if (m.kind == joint::ModelKind::SP) {
                x[i] = std::log(m.spot0 / m.index0);
                y[i] = std::log(m.index0);
                out.series[s++](p, 0) = m.spot0;
                out.series[s++](p, 0) = m.index0;
            } else {
                x[i] = m.one_factor.transform == Transform::Log ? std::log(m.spot0) : m.spot0;
                out.series[s++](p, 0) = m.spot0;
            }
        }
        for (std::size_t k = 1; k < n; ++k) {
            for (std::size_t d = 0; d < dim; ++d) e(static_cast<Eigen::Index>(d)) = normal(rng);
            z.noalias() = *step_loading[k] * e;
            if (spec.store_draws)
                for (std::size_t d = 0; d < dim; ++d) out.draws[d][p * (n - 1) + k - 1] = z(static_cast<Eigen::Index>(d));
            s = 0;
            for (std::size_t i = 0; i < spec.members.size(); ++i) {
                const auto& m = spec.members[i];
                const auto& pl = plans[i];
                const double w = z(static_cast<Eigen::Index>(first_factor[i]));
                if (m.kind == joint::ModelKind::SP) {
                    const double bI = z(static_cast<Eigen::Index>(first_factor[i] + 1));
                    x[i] = pl.eta[k] * x[i] + pl.drift[k] + pl.scale[k] * w - pl.cross[k] * bI;
                    y[i] = y[i] + pl.y_drift[k] + pl.y_scale[k] * bI;
                    out.series[s++](p, k) = std::exp(x[i] + y[i]);
                    out.series[s++](p, k) = std::exp(y[i]);
                } else {
                    x[i] = pl.eta[k] * x[i] + pl.drift[k] + pl.scale[k] * w;
                    out.series[s++](p, k) = m.one_factor.transform == Transform::Log ? std::exp(x[i]) : x[i];
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output.

void write_csv(std::ostream& os, const std::vector<NamedPaths>& series) {
    if (series.empty()) throw Error("write_csv: nothing to write");
    const auto& grid = series.front().paths->grid;
    for (const auto& s : series)
        if (s.paths->grid != grid) throw Error("write_csv: series have different grids");
    os << "date";
    for (const auto& s : series)
        for (std::size_t p = 0; p < s.paths->n_paths; ++p) os << ',' << s.label << "_p" << p;
    os << '\n';
    char buf[32];
    for (std::size_t k = 0; k < grid.size(); ++k) {
        os << format_timestamp(grid[k]);
        for (const auto& s : series) {
            for (std::size_t p = 0; p < s.paths->n_paths; ++p) {
                std::snprintf(buf, sizeof buf, "%.17g", (*s.paths)(p, k));
                os << ',' << buf;
            }
        }
        os << '\n';
    }
}

namespace {

template <class T>
void put(std::ostream& os, T v) {
    // The format is little endian; every supported target is too.
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    os.write(bytes, sizeof(T));
}

}  // namespace

void write_binary(std::ostream& os, const std::vector<NamedPaths>& series, std::uint64_t seed,
                  std::uint64_t spec_hash) {
    if (series.empty()) throw Error("write_binary: nothing to write");
    const auto& first = *series.front().paths;
    for (const auto& s : series)
        if (s.paths->grid != first.grid || s.paths->n_paths != first.n_paths)
            throw Error("write_binary: series differ in grid or path count");
    os.write("MRCP", 4);
    put<std::uint32_t>(os, 1);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(series.size()));
    put<std::uint64_t>(os, first.grid.size());
    put<std::uint64_t>(os, first.n_paths);
    put<std::uint64_t>(os, seed);
    put<std::uint64_t>(os, spec_hash);
    for (const auto t : first.grid) put<std::int64_t>(os, t.time_since_epoch().count());
    for (const auto& s : series) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(s.label.size()));
        os.write(s.label.data(), static_cast<std::streamsize>(s.label.size()));
        for (double v : s.paths->values) put<double>(os, v);
    }
}

}  // namespace mrcal::sim
