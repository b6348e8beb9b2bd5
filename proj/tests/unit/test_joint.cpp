#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <vector>

#include "mrcal/error.hpp"
#include "mrcal/joint.hpp"
#include "mrcal/random.hpp"
#include "mrcal/stats.hpp"

using namespace mrcal;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Two standard normal factor series with correlation rho on a shared daily grid.
std::pair<FactorSeries, FactorSeries> correlated(double rho, std::size_t n, std::uint64_t seed) {
    Xoshiro256 rng(seed);
    NormalSampler normal;
    FactorSeries a{"a", {}}, b{"b", {}};
    auto t = make_timestamp(2005, 1, 1);
    for (std::size_t k = 0; k < n; ++k) {
        const double z1 = normal(rng), z2 = normal(rng);
        a.points.push_back({t, z1});
        b.points.push_back({t, rho * z1 + std::sqrt(1.0 - rho * rho) * z2});
        t += std::chrono::days(1);
    }
    return {a, b};
}

joint::Factor factor(std::string member, FactorSeries s, joint::FactorRole role = joint::FactorRole::Spot) {
    return {std::move(member), joint::ModelKind::MR, role, std::move(s)};
}

}  // namespace

TEST_CASE("factor names carry the role") {
    CHECK(factor("gas", {}).name() == "gas:W");
    CHECK(factor("nbp", {}, joint::FactorRole::Index).name() == "nbp:B");
}

TEST_CASE("trimming removes floor(pct n) from each tail with stable ties") {
    FactorSeries s{"s", {}};
    auto t = make_timestamp(2009, 1, 1);
    const std::vector<double> v{5, -3, 0, 5, 1, -3, 2, 0, 0, 1};
    for (double x : v) {
        s.points.push_back({t, x});
        t += std::chrono::days(1);
    }
    CHECK(joint::trim_outliers(s, 0.05).removed.empty());  // floor(0.5) = 0

    // Pad to 40 points so that 5% removes two from each tail.
    for (int k = 0; k < 30; ++k) {
        s.points.push_back({t, 0.5});
        t += std::chrono::days(1);
    }
    const auto r = joint::trim_outliers(s, 0.05);
    REQUIRE(r.removed.size() == 4);
    CHECK(r.kept.size() == 36);
    // Both -3s and both 5s go.
    CHECK(r.removed == std::vector<Timestamp>{make_timestamp(2009, 1, 1), make_timestamp(2009, 1, 2),
                                             make_timestamp(2009, 1, 4), make_timestamp(2009, 1, 6)});

    FactorSeries ties{"ties", {}};
    t = make_timestamp(2009, 1, 1);
    for (int k = 0; k < 20; ++k) {
        ties.points.push_back({t, 1.0});
        t += std::chrono::days(1);
    }
    const auto tr = joint::trim_outliers(ties, 0.05);
    // Among equal values the earlier timestamps go first, for each tail.
    CHECK(tr.removed == std::vector<Timestamp>{make_timestamp(2009, 1, 1), make_timestamp(2009, 1, 2)});

    CHECK_THROWS_AS(joint::trim_outliers(s, 0.06), Error);
    CHECK_THROWS_AS(joint::trim_outliers(s, -0.01), Error);
}

TEST_CASE("flat correlation recovery with a Fisher interval") {
    auto [a, b] = correlated(0.7, 2500, 1);
    const auto m = joint::build_joint({factor("a", a), factor("b", b)}, PeriodGranularity::Flat);
    REQUIRE(m.correlations.size() == 1);
    const auto& c = m.correlations.front();
    CHECK(c.n == 2500);
    CHECK(c.ci.estimate > 0.65);
    CHECK(c.ci.estimate < 0.75);
    CHECK(c.ci.contains(0.7));
    CHECK_THAT(c.ci.lower, WithinRel(stats::corr_ci(c.ci.estimate, 2500, 0.05).lower, 1e-15));
    const auto& mat = m.matrices.at(0);
    CHECK(mat(0, 1) == c.ci.estimate);
    CHECK(mat(1, 0) == c.ci.estimate);
    CHECK(mat(0, 0) == 1.0);
    CHECK(mat.missing.empty());
    CHECK_THAT(mat.min_eigenvalue, WithinAbs(1.0 - c.ci.estimate, 1e-12));
    CHECK(m.find(1, 0, 0)->n == 2500);
    CHECK_FALSE(m.find(0, 1, 5));
}

TEST_CASE("monthly buckets and missing overlap") {
    auto [a, b] = correlated(0.4, 400, 2);
    // Keep only the first 40 days of b: February onward has no overlap.
    b.points.resize(40);
    const auto m = joint::build_joint({factor("a", a), factor("b", b)}, PeriodGranularity::Monthly);
    // January has 31 points, February 9: both carry estimates; the rest are missing.
    CHECK(m.correlations.size() == 2);
    CHECK(m.find(0, 1, 1)->n == 31);
    CHECK(m.find(0, 1, 2)->n == 9);
    CHECK(m.matrices.at(3).missing.size() == 1);
    CHECK(m.matrices.at(3)(0, 1) == 0.0);
    bool reported = false;
    for (const auto& d : m.diagnostics) reported |= d.find("bucket Mar: only 0 common points") != std::string::npos;
    CHECK(reported);
}

TEST_CASE("trimming applies pairwise on the union of removed instants") {
    auto [a, b] = correlated(0.5, 1000, 3);
    a.points[10].value = 50.0;
    b.points[20].value = -50.0;
    const auto m = joint::build_joint({factor("a", a), factor("b", b)}, PeriodGranularity::Flat, 0.05, 0.01);
    // Each side trims 10 + 10 points; the removed sets are disjoint with high probability.
    CHECK(m.correlations.front().n <= 980);
    CHECK(m.correlations.front().n >= 960);
    CHECK(m.diagnostics.size() == 2);
}

TEST_CASE("an inconsistent triple is reported as not positive semidefinite") {
    // Each pair overlaps on its own block of days: x ~ y on the first, y ~ z
    // on the second and x ~ -z on the third. No joint law has those correlations.
    Xoshiro256 rng(4);
    NormalSampler normal;
    FactorSeries x{"x", {}}, y{"y", {}}, z{"z", {}};
    const auto t0 = make_timestamp(2005, 1, 1);
    for (int k = 0; k < 300; ++k) {
        const auto day = t0 + std::chrono::days(k);
        const double base = normal(rng);
        const double noisy = base + 0.1 * normal(rng);
        if (k < 100) {
            x.points.push_back({day, base});
            y.points.push_back({day, noisy});
        } else if (k < 200) {
            y.points.push_back({day, base});
            z.points.push_back({day, noisy});
        } else {
            x.points.push_back({day, base});
            z.points.push_back({day, -noisy});
        }
    }
    const auto m = joint::build_joint({factor("x", x), factor("y", y), factor("z", z)}, PeriodGranularity::Flat);
    const auto& mat = m.matrices.at(0);
    CHECK(mat(0, 1) > 0.95);
    CHECK(mat(1, 2) > 0.95);
    CHECK(mat(0, 2) < -0.95);
    CHECK(mat.min_eigenvalue < -0.8);
    CHECK_THAT(mat.min_eigenvalue, WithinAbs(joint::min_eigenvalue(mat.values, 3), 1e-15));
    bool flagged = false;
    for (const auto& d : m.diagnostics) flagged |= d.find("not positive semidefinite") != std::string::npos;
    CHECK(flagged);
}

TEST_CASE("smallest eigenvalue of known matrices") {
    CHECK_THAT(joint::min_eigenvalue({1, 0.5, 0.5, 1}, 2), WithinAbs(0.5, 1e-14));
    CHECK_THAT(joint::min_eigenvalue({1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1}, 3), WithinAbs(1.0 - 1.8, 1e-12));
    CHECK_THROWS_AS(joint::min_eigenvalue({1, 0, 0}, 2), Error);
}

TEST_CASE("granularity advisory") {
    auto [a, b] = correlated(0.7, 730, 5);
    const auto monthly = joint::build_joint({factor("a", a), factor("b", b)}, PeriodGranularity::Monthly);
    const auto rec = joint::granularity_check(monthly, 0.1);
    CHECK(rec.flagged.size() == 12);
    CHECK(rec.suggestion == PeriodGranularity::Seasonal);

    const auto flat = joint::build_joint({factor("a", a), factor("b", b)}, PeriodGranularity::Flat);
    CHECK(joint::granularity_check(flat, 0.1).flagged.empty());
    const auto tight = joint::granularity_check(flat, 0.01);
    CHECK(tight.flagged.size() == 1);
    CHECK_FALSE(tight.suggestion);
}

TEST_CASE("joint model input validation") {
    auto [a, b] = correlated(0.1, 50, 6);
    CHECK_THROWS_AS(joint::build_joint({factor("a", a)}, PeriodGranularity::Flat), Error);
    CHECK_THROWS_AS(joint::build_joint({factor("a", a), factor("b", b)}, PeriodGranularity::Flat, 1.0), Error);
    FactorSeries later{"c", {{make_timestamp(2010, 1, 1), 1.0}, {make_timestamp(2010, 1, 2), 2.0}}};
    CHECK_THROWS_AS(joint::build_joint({factor("a", a), factor("c", later)}, PeriodGranularity::Flat), Error);
}
