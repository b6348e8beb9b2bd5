#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mrcal/error.hpp"
#include "mrcal/random.hpp"
#include "mrcal/spot_prompt.hpp"
#include "synthetic.hpp"

using namespace mrcal;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Pair {
    PriceSeries spot;
    PriceSeries index;
};

Pair simulate_pair(const sp::SPParams& truth, std::uint64_t seed, int first_year = 2008, int years = 2) {
    sim::RealWorldOptions o;
    o.grid = sim::make_grid(make_timestamp(first_year, 1, 1), make_timestamp(first_year + years - 1, 12, 31),
                            sim::GridFrequency::Daily);
    o.seed = seed;
    const auto out = sim::simulate_sp_realworld(truth, 5.0, 5.0, o);
    return {out.spot.path_series(0, "spot"), out.index.path_series(0, "index")};
}

sp::SPOptions flat_options() {
    sp::SPOptions o;
    o.shape.level = LevelGranularity::Flat;
    o.shape.vol = PeriodGranularity::Flat;
    o.corr = PeriodGranularity::Flat;
    return o;
}

// sigma_q^2 = sigma_S^2 + sigma_I^2 - 2 sigma_S sigma_I rho, checked month by month.
void check_identity(const sp::SPParams& p) {
    for (int m = 1; m <= 12; ++m) {
        if (!p.sigma_S.count(period_bucket(m, p.spot_granularity))) continue;
        const double sS = p.sigma_S_at(m), sq = p.sigma_q_at(m), sI = p.sigma_I_at(m), rho = p.rho_at(m);
        CHECK_THAT(sS * sS + sI * sI - 2.0 * sS * sI * rho, WithinRel(sq * sq, 1e-10));
    }
}

}  // namespace

TEST_CASE("increment correlation quoted values") {
    CHECK_THAT(sp::rho_nu_xi(0.5, 1.0), WithinRel(0.98978515326046213, 1e-14));
    CHECK_THAT(sp::rho_nu_xi(1.0, 1.0), WithinRel(0.96137105974749392, 1e-14));
    CHECK(std::round(sp::rho_nu_xi(50.0, 0.01) * 100) / 100 == 0.99);
    CHECK(std::round(sp::rho_nu_xi(365.0, 1.0 / 365.0) * 100) / 100 == 0.96);
    CHECK_THAT(sp::rho_nu_xi(1e-12, 1.0), WithinAbs(1.0, 1e-15));
    CHECK(sp::rho_nu_xi(0.0, 1.0) == 1.0);
    // Decreasing in a * dt.
    CHECK(sp::rho_nu_xi(2.0, 1.0) < sp::rho_nu_xi(1.0, 1.0));
    CHECK_THROWS_AS(sp::rho_nu_xi(1.0, 0.0), Error);
}

TEST_CASE("covariance recovery of sigma_S rho") {
    Xoshiro256 rng(3);
    NormalSampler normal;
    const double sS = 0.8, sI = 0.5, rho = 0.3;
    std::vector<double> x, y;
    std::vector<int> b;
    for (int k = 0; k < 20000; ++k) {
        const double z1 = normal(rng), z2 = normal(rng);
        const double w = rho * z1 + std::sqrt(1 - rho * rho) * z2;
        y.push_back(sI * z1);
        x.push_back(sS * w - sI * z1);
        b.push_back(k % 2);
    }
    const auto out = sp::covar_recover(x, y, b, {{0, sI}, {1, sI}});
    REQUIRE(out.size() == 2);
    CHECK_THAT(out.at(0), WithinAbs(sS * rho, 0.02));
    CHECK_THAT(out.at(1), WithinAbs(sS * rho, 0.02));

    // The formula itself, on a three-point sample.
    const std::vector<double> xs{1, 2, 4}, ys{0, 1, 1};
    const std::vector<int> one{5, 5, 5};
    const double cov = (1 * 0 + 2 * 1 + 4 * 1 - 7.0 * 2.0 / 3.0) / 2.0;
    CHECK_THAT(sp::covar_recover(xs, ys, one, {{5, 2.0}}).at(5), WithinRel(cov / 2.0 + 2.0, 1e-15));

    // Buckets with zero or missing index volatility are omitted.
    CHECK(sp::covar_recover(xs, ys, one, {{5, 0.0}}).empty());
    CHECK(sp::covar_recover(xs, ys, one, {}).empty());
    CHECK_THROWS_AS(sp::covar_recover(xs, ys, std::vector<int>{1}, {}), Error);
}

TEST_CASE("spot-prompt calibration on a flat simulated pair") {
    const auto truth = testing::flat_sp_params(150.0, 0.8, 0.5, 0.3);
    const auto data = simulate_pair(truth, 41);
    const auto cal = sp::calibrate_sp(data.spot, data.index, flat_options());
    const auto& p = cal.params;

    REQUIRE(p.rate_stderr);
    CHECK(std::abs(p.rate - 150.0) < 4.0 * *p.rate_stderr);
    REQUIRE(p.sigma_S_ci.count(0));
    REQUIRE(p.sigma_I_ci.count(0));
    REQUIRE(p.rho_ci.count(0));
    CHECK(p.sigma_S_ci.at(0).contains(0.8));
    CHECK(p.sigma_I_ci.at(0).contains(0.5));
    CHECK(p.rho_ci.at(0).contains(0.3));
    CHECK(p.invalid.empty());
    check_identity(p);

    REQUIRE(cal.spot_fit);
    REQUIRE(cal.index_fit);
    CHECK(std::abs(cal.index_fit->stddev - 1.0) < 0.1);
    CHECK(std::abs(cal.spot_fit->stddev - 1.0) < 0.2);
    CHECK(cal.spot_factor.label == "spot");
    CHECK(cal.index_factor.label == "index");
}

TEST_CASE("spot granularity is the finer of volatility and correlation") {
    const auto truth = testing::flat_sp_params(150.0, 0.8, 0.5, 0.3);
    const auto data = simulate_pair(truth, 42);

    auto opt = flat_options();
    opt.shape.vol = PeriodGranularity::Seasonal;
    opt.corr = PeriodGranularity::Monthly;
    const auto nested = sp::calibrate_sp(data.spot, data.index, opt);
    CHECK(nested.params.spot_granularity == PeriodGranularity::Monthly);
    CHECK(nested.params.sigma_S.size() == 12);
    CHECK(nested.params.rho.size() == 12);
    check_identity(nested.params);

    opt.shape.vol = PeriodGranularity::Monthly;
    opt.corr = PeriodGranularity::Flat;
    const auto coarse = sp::calibrate_sp(data.spot, data.index, opt);
    CHECK(coarse.params.spot_granularity == PeriodGranularity::Monthly);
    CHECK(coarse.params.sigma_S.size() == 12);
    CHECK(coarse.params.rho.size() == 1);
    check_identity(coarse.params);
}

TEST_CASE("roll dates remove the steps that span them") {
    const auto truth = testing::flat_sp_params(150.0, 0.8, 0.5, 0.3);
    const auto data = simulate_pair(truth, 43);
    auto opt = flat_options();
    opt.roll_dates = sim::default_roll_dates(make_timestamp(2008, 1, 1), make_timestamp(2009, 12, 31));
    const auto cal = sp::calibrate_sp(data.spot, data.index, opt);
    // Daily data: each roll inside the sample removes exactly one step.
    std::size_t inside = 0;
    for (auto t : opt.roll_dates)
        if (t > data.spot.front().time && t <= data.spot.back().time) ++inside;
    CHECK(cal.spot_factor.size() == data.spot.size() - 1 - inside);
    CHECK_THAT(cal.diagnostics.front(), Catch::Matchers::ContainsSubstring("roll dates excluded"));
}

TEST_CASE("a bucket with a single step is flagged invalid, not dropped silently") {
    const auto truth = testing::flat_sp_params(150.0, 0.8, 0.5, 0.3);
    sim::RealWorldOptions o;
    o.grid = sim::make_grid(make_timestamp(2008, 1, 1), make_timestamp(2008, 6, 2), sim::GridFrequency::Daily);
    o.seed = 44;
    const auto out = sim::simulate_sp_realworld(truth, 5.0, 5.0, o);
    auto opt = flat_options();
    opt.shape.vol = PeriodGranularity::Monthly;
    opt.corr = PeriodGranularity::Monthly;
    const auto cal = sp::calibrate_sp(out.spot.path_series(0, "s"), out.index.path_series(0, "i"), opt);
    // June holds one step (06-01 -> 06-02): no unbiased volatility there.
    REQUIRE(cal.params.invalid.size() == 1);
    CHECK(cal.params.invalid.front().bucket == 6);
    CHECK_FALSE(cal.params.sigma_S.count(6));
    CHECK_THROWS_WITH(cal.params.sigma_S_at(6), Catch::Matchers::ContainsSubstring("Jun"));
    bool mentioned = false;
    for (const auto& d : cal.diagnostics) mentioned |= d.find("invalid spot bucket Jun") != std::string::npos;
    CHECK(mentioned);
}

TEST_CASE("spot-prompt calibration rejects non-positive prices") {
    std::vector<Observation> s{{make_timestamp(2009, 1, 1), 1.0}, {make_timestamp(2009, 1, 2), -1.0}, {make_timestamp(2009, 1, 3), 1.0}};
    std::vector<Observation> i{{make_timestamp(2009, 1, 1), 1.0}, {make_timestamp(2009, 1, 2), 1.0}, {make_timestamp(2009, 1, 3), 1.0}};
    CHECK_THROWS_AS(sp::calibrate_sp(PriceSeries("s", s), PriceSeries("i", i)), Error);
}
