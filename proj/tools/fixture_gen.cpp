// Writes the seed-pinned synthetic price histories used by the CLI tests and
// the README examples. Output is byte-stable: rerunning with the same
// arguments reproduces the committed files exactly.
//
//   mrcal_fixture_gen <out-dir>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "mrcal/error.hpp"
#include "mrcal/simulate.hpp"

namespace {

using namespace mrcal;

void write_series(const std::filesystem::path& path, const sim::Paths& p, const char* column) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << "date," << column << '\n';
    char buf[32];
    for (std::size_t k = 0; k < p.grid.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.10f", p(0, k));
        os << format_timestamp(p.grid[k]) << ',' << buf << '\n';
    }
}

// Seasonal one-factor model: winter volatility 1.5, summer 0.5, a calendar
// month level around log 5.
mr::MRParams seasonal_mr(double rate) {
    mr::MRParams p;
    p.rate = rate;
    p.shape.level = LevelGranularity::CalendarMonth;
    for (int m = 1; m <= 12; ++m) {
        const double phase = 2.0 * std::numbers::pi * (m - 1) / 12.0;
        p.sigma[m] = 1.0 + 0.5 * std::cos(phase);
        p.theta[{0, m}] = rate * (std::log(5.0) + 0.15 * std::cos(phase));
    }
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: mrcal_fixture_gen <out-dir>\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    try {
        std::filesystem::create_directories(dir);

        // One-factor history: a* = 40, ten years of weekdays.
        sim::RealWorldOptions o;
        o.grid = sim::make_grid(make_timestamp(2000, 1, 3), make_timestamp(2009, 12, 31), sim::GridFrequency::Weekdays);
        o.seed = 20090101;
        write_series(dir / "mr_a40.csv", sim::simulate_mr_realworld(seasonal_mr(40.0), 5.0, o), "price");

        // Two one-factor markets driven by noises correlated at 0.7.
        sim::JointSpec js;
        js.members.push_back({"gas", joint::ModelKind::MR, seasonal_mr(40.0), {}, 5.0, 1.0});
        js.members.push_back({"power", joint::ModelKind::MR, seasonal_mr(60.0), {}, 5.0, 1.0});
        js.granularity = PeriodGranularity::Flat;
        js.matrices[0] = {1.0, 0.7, 0.7, 1.0};
        js.grid = sim::make_grid(make_timestamp(2005, 1, 3), make_timestamp(2009, 12, 31), sim::GridFrequency::Weekdays);
        js.seed = 7;
        const auto joint = sim::simulate_joint(js);
        write_series(dir / "joint_gas.csv", joint.series[0], "price");
        write_series(dir / "joint_power.csv", joint.series[1], "price");

        // Spot and prompt index: a* = 150, sigma_S 0.8, sigma_I 0.5, rho 0.3.
        sp::SPParams sp;
        sp.shape.level = LevelGranularity::Flat;
        sp.shape.vol = PeriodGranularity::Flat;
        sp.spot_granularity = PeriodGranularity::Flat;
        sp.rate = 150.0;
        sp.theta_tilde[{0, 0}] = 0.0;
        sp.mu[{0, 0}] = 0.0;
        sp.sigma_S[0] = 0.8;
        sp.sigma_I[0] = 0.5;
        sp.rho[0] = 0.3;
        sim::RealWorldOptions so;
        so.grid = sim::make_grid(make_timestamp(2008, 1, 1), make_timestamp(2009, 12, 31), sim::GridFrequency::Daily);
        so.seed = 150;
        const auto spi = sim::simulate_sp_realworld(sp, 5.0, 5.0, so);
        write_series(dir / "sp_spot.csv", spi.spot, "price");
        write_series(dir / "sp_index.csv", spi.index, "price");
    } catch (const std::exception& e) {
        std::cerr << "mrcal_fixture_gen: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
