#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <vector>

#include "mrcal/error.hpp"
#include "mrcal/random.hpp"
#include "mrcal/simulate.hpp"
#include "mrcal/stats.hpp"
#include "quadrature.hpp"
#include "synthetic.hpp"

using namespace mrcal;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

sim::MonthlyCurve seasonal_curve() {
    sim::MonthlyCurve c{};
    for (int m = 1; m <= 12; ++m) c[static_cast<std::size_t>(m - 1)] = testing::seasonal_sigma(m);
    return c;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<double> column(const sim::Paths& p, std::size_t k) {
    std::vector<double> out(p.n_paths);
    for (std::size_t i = 0; i < p.n_paths; ++i) out[i] = p(i, k);
    return out;
}

}  // namespace

TEST_CASE("term structure expansion") {
    const auto flat = sim::flat_curve(0.3);
    CHECK(flat[0] == 0.3);
    CHECK(flat[11] == 0.3);
    const auto seasonal = sim::expand({{1, 1.0}, {2, 2.0}, {3, 3.0}, {4, 4.0}}, PeriodGranularity::Seasonal);
    CHECK(seasonal[11] == 1.0);  // December sits in DJF
    CHECK(seasonal[2] == 2.0);
    CHECK(seasonal[10] == 4.0);
    CHECK_THROWS_WITH(sim::expand({{1, 1.0}}, PeriodGranularity::Monthly), Catch::Matchers::ContainsSubstring("Feb"));
}

TEST_CASE("forward curve is a right-continuous step") {
    const sim::ForwardCurve f({{make_timestamp(2009, 1, 1), 5.0}, {make_timestamp(2009, 2, 1), 6.0}});
    CHECK(f(make_timestamp(2009, 1, 1)) == 5.0);
    CHECK(f(make_timestamp(2009, 1, 31, 23, 59)) == 5.0);
    CHECK(f(make_timestamp(2009, 2, 1)) == 6.0);
    CHECK(f(make_timestamp(2012, 1, 1)) == 6.0);
    CHECK_THROWS_AS(f(make_timestamp(2008, 12, 31)), Error);
    CHECK_THROWS_AS(sim::ForwardCurve({}), Error);
    CHECK_THROWS_AS(sim::ForwardCurve({{make_timestamp(2009, 1, 1), -1.0}}), Error);
    CHECK_THROWS_AS(sim::ForwardCurve({{make_timestamp(2009, 2, 1), 1.0}, {make_timestamp(2009, 1, 1), 1.0}}), Error);
}

TEST_CASE("grids") {
    const auto wk = sim::make_grid(make_timestamp(2009, 1, 2), make_timestamp(2009, 1, 12), sim::GridFrequency::Weekdays);
    CHECK(wk.size() == 7);  // Fri, Mon..Fri, Mon
    for (auto t : wk) CHECK(sim::is_weekday(t));

    const auto monthly = sim::make_grid(make_timestamp(2008, 1, 31), make_timestamp(2008, 5, 31), sim::GridFrequency::Monthly);
    REQUIRE(monthly.size() == 5);
    CHECK(monthly[1] == make_timestamp(2008, 2, 29));
    CHECK(monthly[2] == make_timestamp(2008, 3, 31));
    CHECK(monthly[3] == make_timestamp(2008, 4, 30));

    CHECK(sim::make_grid(make_timestamp(2009, 1, 1), make_timestamp(2009, 1, 29), sim::GridFrequency::Weekly).size() == 5);
    CHECK_THROWS_AS(sim::make_grid(make_timestamp(2009, 1, 2), make_timestamp(2009, 1, 1), sim::GridFrequency::Daily), Error);
    CHECK(sim::parse_grid_frequency("weekdays") == sim::GridFrequency::Weekdays);
    CHECK_FALSE(sim::parse_grid_frequency("hourly"));
}

TEST_CASE("default roll dates: third weekday before the delivery month") {
    const auto rolls = sim::default_roll_dates(make_timestamp(2009, 1, 1), make_timestamp(2009, 12, 31));
    // Up to and including the first roll after the end.
    REQUIRE(rolls.size() == 13);
    CHECK(rolls.front() == make_timestamp(2009, 1, 28));  // Jan 31 is a Saturday
    CHECK(rolls[11] == make_timestamp(2009, 12, 29));
    CHECK(rolls.back() == make_timestamp(2010, 1, 27));

    const auto on_roll = sim::default_roll_dates(make_timestamp(2009, 1, 28), make_timestamp(2009, 2, 25));
    REQUIRE(on_roll.size() == 2);
    CHECK(on_roll.front() == make_timestamp(2009, 2, 25));
    CHECK(on_roll.back() == make_timestamp(2009, 3, 27));
    CHECK_THROWS_AS(sim::default_roll_dates(make_timestamp(2009, 1, 1), make_timestamp(2009, 2, 1), 0), Error);
}

TEST_CASE("v_squared against quadrature and closed forms") {
    const auto sigma = seasonal_curve();
    const auto t0 = make_timestamp(2009, 1, 17, 6);
    const auto t1 = make_timestamp(2009, 5, 3, 18);
    for (double a : {0.0, 0.5, 12.0, 150.0}) {
        const double oracle = testing::v_squared_by_quadrature(a, sigma, t0, t1);
        CHECK_THAT(sim::v_squared(a, sigma, t0, t1), WithinRel(oracle, 1e-12));
    }
    // Constant volatility: s^2 (1 - e^{-2aT}) / (2a).
    const auto flat = sim::flat_curve(0.7);
    const double T = sim::years_since(t0, t1);
    CHECK_THAT(sim::v_squared(3.0, flat, t0, t1), WithinRel(0.49 * -std::expm1(-6.0 * T) / 6.0, 1e-13));
    CHECK_THAT(sim::v_squared(0.0, flat, t0, t1), WithinRel(0.49 * T, 1e-13));
    // Composition over an intermediate instant.
    const auto tm = make_timestamp(2009, 3, 2);
    const double a = 20.0;
    const double e = std::exp(-2.0 * a * sim::years_since(tm, t1));
    CHECK_THAT(sim::v_squared(a, sigma, t0, t1),
               WithinRel(e * sim::v_squared(a, sigma, t0, tm) + sim::v_squared(a, sigma, tm, t1), 1e-13));
    CHECK_THROWS_AS(sim::v_squared(a, sigma, t1, t0), Error);
}

TEST_CASE("sp_theta against quadrature") {
    sim::SPCurves c;
    for (std::size_t i = 0; i < 12; ++i) {
        c.sigma_S[i] = 0.6 + 0.05 * static_cast<double>(i);
        c.sigma_I[i] = 0.4 - 0.01 * static_cast<double>(i);
        c.rho[i] = 0.2 + 0.03 * static_cast<double>(i);
    }
    const auto Ti = make_timestamp(2009, 2, 25);
    const auto Tn = make_timestamp(2009, 3, 27);
    for (auto t : {Ti, make_timestamp(2009, 2, 28, 12), make_timestamp(2009, 3, 20)}) {
        const double oracle = testing::sp_theta_by_quadrature(80.0, c, Ti, t);
        CHECK_THAT(sim::sp_theta(80.0, c, Ti, t, Tn), WithinRel(oracle, 1e-12));
    }
    CHECK_THROWS_AS(sim::sp_theta(80.0, c, Ti, Tn, Tn), Error);
    CHECK_THROWS_AS(sim::sp_theta(0.0, c, Ti, Ti, Tn), Error);
}

TEST_CASE("forward curve evolution limits") {
    const sim::ForwardCurve f({{make_timestamp(2009, 1, 1), 5.0}, {make_timestamp(2009, 6, 1), 7.0}});
    const auto sigma = sim::flat_curve(0.8);
    const auto origin = make_timestamp(2009, 1, 1);
    // At the value date with the spot on the curve, the curve is returned.
    CHECK_THAT(sim::forward_curve_evolve(f, 5.0, origin, origin, make_timestamp(2009, 7, 1), 10.0, sigma), WithinRel(7.0, 1e-15));
    // A contract at its own expiry is the spot.
    const auto t = make_timestamp(2009, 3, 1);
    CHECK_THAT(sim::forward_curve_evolve(f, 4.2, origin, t, t, 10.0, sigma), WithinRel(4.2, 1e-14));
}

TEST_CASE("risk-neutral one-factor paths") {
    sim::MRRiskNeutralSpec spec;
    spec.a = 10.0;
    spec.sigma = seasonal_curve();
    spec.curve = sim::ForwardCurve({{make_timestamp(2009, 1, 1), 5.0}, {make_timestamp(2009, 7, 1), 8.0}});
    spec.grid = sim::make_grid(make_timestamp(2009, 1, 1), make_timestamp(2009, 12, 1), sim::GridFrequency::Monthly);
    spec.n_paths = 20000;
    spec.seed = 12;
    const auto paths = sim::simulate_mr(spec);

    for (std::size_t k = 0; k < spec.grid.size(); ++k) {
        const auto col = column(paths, k);
        const double fwd = (*spec.curve)(spec.grid[k]);
        const double se = stddev(col) / std::sqrt(static_cast<double>(col.size()));
        CHECK(std::abs(mean(col) - fwd) <= 4.0 * se + 1e-12 * fwd);
    }
    // Log variance at the horizon equals V^2(0, T).
    std::vector<double> logs;
    for (double v : column(paths, spec.grid.size() - 1)) logs.push_back(std::log(v));
    const double v2 = sim::v_squared(spec.a, spec.sigma, spec.grid.front(), spec.grid.back());
    CHECK_THAT(stddev(logs) * stddev(logs), WithinRel(v2, 0.05));

    // Zero volatility reproduces the curve exactly.
    spec.sigma = sim::flat_curve(0.0);
    spec.n_paths = 3;
    const auto still = sim::simulate_mr(spec);
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t k = 0; k < spec.grid.size(); ++k) CHECK(still(p, k) == (*spec.curve)(spec.grid[k]));
}

TEST_CASE("paths are keyed by seed and index") {
    sim::MRRiskNeutralSpec spec;
    spec.a = 5.0;
    spec.sigma = sim::flat_curve(0.5);
    spec.curve = sim::ForwardCurve::flat(make_timestamp(2009, 1, 1), 5.0);
    spec.grid = sim::make_grid(make_timestamp(2009, 1, 1), make_timestamp(2009, 3, 1), sim::GridFrequency::Weekly);
    spec.n_paths = 10;
    spec.seed = 3;
    const auto a = sim::simulate_mr(spec);
    const auto b = sim::simulate_mr(spec);
    CHECK(a.values == b.values);
    spec.n_paths = 20;
    const auto more = sim::simulate_mr(spec);
    CHECK(std::equal(a.values.begin(), a.values.end(), more.values.begin()));
    spec.seed = 4;
    CHECK(sim::simulate_mr(spec).values[5] != more.values[5]);
}

TEST_CASE("real-world recursion reproduces its draws") {
    const auto params = testing::seasonal_params(40.0);
    std::vector<double> draws;
    sim::RealWorldOptions o;
    o.grid = testing::weekday_grid(2009, 1);
    o.n_paths = 2;
    o.seed = 8;
    o.draws = &draws;
    const auto paths = sim::simulate_mr_realworld(params, 5.0, o);
    const std::size_t n = o.grid.size();
    REQUIRE(draws.size() == 2 * (n - 1));
    CHECK(paths(1, 0) == 5.0);
    for (std::size_t k = 1; k < n; ++k) {
        const auto c = mr::coefs(40.0, sim::years_since(o.grid[k - 1], o.grid[k]));
        const auto my = month_year(o.grid[k - 1]);
        const double x = c.eta * std::log(paths(1, k - 1)) + params.theta_at(my) * c.kappa +
                         params.sigma_at(my.month) * c.gamma * draws[(n - 1) + k - 1];
        CHECK_THAT(std::log(paths(1, k)), WithinAbs(x, 1e-12));
    }
    CHECK_THROWS_AS(sim::simulate_mr_realworld(params, -1.0, o), Error);

    mr::BSParams bs;
    bs.mu[{2009, 1}] = 0.0;
    bs.sigma[1] = 0.3;
    const auto wrapped = sim::as_one_factor(bs);
    CHECK(wrapped.rate == 0.0);
    CHECK(wrapped.theta_at({2009, 1}) == 0.0);
}

TEST_CASE("spot-prompt risk-neutral paths") {
    sim::SPRiskNeutralSpec spec;
    spec.a = 150.0;
    spec.b = 0.5;
    spec.curves.sigma_S = sim::flat_curve(0.8);
    spec.curves.sigma_I = sim::flat_curve(0.5);
    spec.curves.rho = sim::flat_curve(0.3);
    spec.curve = sim::ForwardCurve::flat(make_timestamp(2009, 1, 1), 5.0);
    spec.grid = sim::make_grid(make_timestamp(2009, 1, 1), make_timestamp(2009, 4, 30), sim::GridFrequency::Daily);
    spec.n_paths = 4000;
    spec.seed = 21;
    const auto out = sim::simulate_sp(spec);

    // Rolls inside the grid: Jan 28, Feb 25, Mar 27, Apr 28 (2009).
    REQUIRE(out.rolls.size() == 4);
    CHECK(out.rolls[0] == make_timestamp(2009, 1, 28));
    REQUIRE(out.index_at_roll.size() == 4 * spec.n_paths);

    // On a roll day the spot equals the expiring contract.
    const auto k = static_cast<std::size_t>(std::find(spec.grid.begin(), spec.grid.end(), out.rolls[1]) - spec.grid.begin());
    for (std::size_t p = 0; p < 50; ++p) CHECK_THAT(out.spot(p, k), WithinRel(out.index_at_roll[p * 4 + 1], 1e-12));

    // Within a window the spot is a martingale relative to the expiring contract.
    const auto t = make_timestamp(2009, 3, 10);
    const auto kt = static_cast<std::size_t>(std::find(spec.grid.begin(), spec.grid.end(), t) - spec.grid.begin());
    std::vector<double> ratio;
    for (std::size_t p = 0; p < spec.n_paths; ++p) ratio.push_back(out.spot(p, kt) / out.index_at_roll[p * 4 + 1]);
    CHECK(std::abs(mean(ratio) - 1.0) <= 4.0 * stddev(ratio) / std::sqrt(static_cast<double>(ratio.size())));

    spec.roll_dates = {make_timestamp(2009, 2, 1)};
    CHECK_THROWS_WITH(sim::simulate_sp(spec), Catch::Matchers::ContainsSubstring("past the grid end"));
    spec.roll_dates = {};
    spec.curves.rho = sim::flat_curve(1.5);
    CHECK_THROWS_AS(sim::simulate_sp(spec), Error);
}

TEST_CASE("printed spot-prompt moments are finite and positive") {
    sim::SPCurves c{sim::flat_curve(0.8), sim::flat_curve(0.5), sim::flat_curve(0.3)};
    const auto m = sim::sp_printed_moments(150.0, c, make_timestamp(2009, 1, 28), make_timestamp(2009, 2, 2),
                                           make_timestamp(2009, 2, 10), std::log(5.0), std::log(5.0));
    CHECK(std::isfinite(m.mean));
    CHECK(m.variance > 0.0);
    CHECK_THROWS_AS(sim::sp_printed_moments(150.0, c, make_timestamp(2009, 2, 5), make_timestamp(2009, 2, 2),
                                            make_timestamp(2009, 2, 10), 0.0, 0.0),
                    Error);
}

TEST_CASE("real-world spot-prompt draws have the model correlation") {
    const auto params = testing::flat_sp_params(150.0, 0.8, 0.5, 0.3);
    sim::RealWorldOptions o;
    o.grid = sim::make_grid(make_timestamp(2008, 1, 1), make_timestamp(2009, 12, 31), sim::GridFrequency::Daily);
    o.n_paths = 4;
    o.seed = 5;
    const auto out = sim::simulate_sp_realworld(params, 5.0, 4.0, o);
    CHECK(out.spot(0, 0) == 5.0);
    CHECK(out.index(0, 0) == 4.0);
    CHECK_THAT(stddev(out.spot_draws), WithinAbs(1.0, 0.03));
    CHECK_THAT(stddev(out.index_draws), WithinAbs(1.0, 0.03));
    // Corr(W increment over the step, B increment) = rho * rho_nu_xi.
    const double expected = 0.3 * sp::rho_nu_xi(150.0, 1.0 / 365.0);
    CHECK_THAT(stats::pearson(out.spot_draws, out.index_draws), WithinAbs(expected, 0.04));
}

TEST_CASE("correlation repair") {
    std::vector<double> ok{1, 0.5, 0.5, 1};
    double lo = 0.0;
    CHECK_FALSE(sim::repair_correlation(ok, 2, &lo));
    CHECK_THAT(lo, WithinAbs(0.5, 1e-14));
    CHECK(ok == std::vector<double>{1, 0.5, 0.5, 1});

    std::vector<double> bad{1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1};
    CHECK(sim::repair_correlation(bad, 3, &lo));
    CHECK(lo < 0.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(bad[i * 3 + i] == 1.0);
    CHECK(joint::min_eigenvalue(bad, 3) > -1e-12);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(bad[i * 3 + j] == bad[j * 3 + i]);
    CHECK_THROWS_AS(sim::repair_correlation(bad, 2), Error);
}

TEST_CASE("joint simulation draws follow the bucket matrices") {
    sim::JointSpec spec;
    spec.members.push_back({"gas", joint::ModelKind::MR, testing::seasonal_params(40.0), {}, 5.0, 1.0});
    spec.members.push_back({"nbp", joint::ModelKind::SP, {}, testing::flat_sp_params(150.0, 0.8, 0.5, 0.3), 5.0, 5.0});
    REQUIRE(sim::factor_count(spec.members) == 3);
    spec.granularity = PeriodGranularity::Flat;
    spec.matrices[0] = {1.0, 0.6, -0.2, 0.6, 1.0, 0.1, -0.2, 0.1, 1.0};
    spec.grid = testing::weekday_grid(2008, 4);
    spec.n_paths = 4;
    spec.seed = 17;
    spec.store_draws = true;
    const auto out = sim::simulate_joint(spec);
    CHECK(out.labels == std::vector<std::string>{"gas", "nbp", "nbp.index"});
    CHECK(out.factor_names == std::vector<std::string>{"gas:W", "nbp:W", "nbp:B"});
    CHECK(out.repairs.empty());
    CHECK_THAT(stats::pearson(out.draws[0], out.draws[1]), WithinAbs(0.6, 0.05));
    CHECK_THAT(stats::pearson(out.draws[0], out.draws[2]), WithinAbs(-0.2, 0.05));
    CHECK_THAT(stats::pearson(out.draws[1], out.draws[2]), WithinAbs(0.1, 0.05));

    spec.matrices[0] = {1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0};
    const auto repaired = sim::simulate_joint(spec);
    REQUIRE(repaired.repairs.size() == 1);
    CHECK(repaired.repairs.front().min_eigenvalue < 0.0);

    spec.granularity = PeriodGranularity::Seasonal;
    CHECK_THROWS_WITH(sim::simulate_joint(spec), Catch::Matchers::ContainsSubstring("DJF"));
}

TEST_CASE("path output formats") {
    sim::Paths p;
    p.grid = {make_timestamp(2009, 1, 1), make_timestamp(2009, 1, 2)};
    p.n_paths = 2;
    p.values = {1.0, 0.1, 2.0, 1.0 / 3.0};
    std::ostringstream csv;
    sim::write_csv(csv, {{"s", &p}});
    CHECK(csv.str() == "date,s_p0,s_p1\n2009-01-01,1,2\n2009-01-02,0.10000000000000001,0.33333333333333331\n");

    std::ostringstream bin;
    sim::write_binary(bin, {{"s", &p}}, 42, 0xabcdef);
    const auto bytes = bin.str();
    REQUIRE(bytes.size() == 4 + 4 + 4 + 8 * 4 + 2 * 8 + 4 + 1 + 4 * 8);
    CHECK(bytes.substr(0, 4) == "MRCP");
    std::uint64_t seed = 0, hash = 0;
    std::memcpy(&seed, bytes.data() + 28, 8);
    std::memcpy(&hash, bytes.data() + 36, 8);
    CHECK(seed == 42);
    CHECK(hash == 0xabcdef);
    std::int64_t t0 = 0;
    std::memcpy(&t0, bytes.data() + 44, 8);
    CHECK(t0 == make_timestamp(2009, 1, 1).time_since_epoch().count());
    double last = 0.0;
    std::memcpy(&last, bytes.data() + bytes.size() - 8, 8);
    CHECK(last == 1.0 / 3.0);
}
