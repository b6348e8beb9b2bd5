// Simulates the null distribution of the Jarque-Bera statistic for a ladder
// of sample sizes and writes upper-tail quantiles as a C++ include file.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

#include "mrcal/random.hpp"

namespace {

constexpr std::uint64_t kSeed = 20100225;
constexpr std::size_t kSimulations = 100000;
constexpr std::array<std::size_t, 8> kLadder = {10, 20, 50, 100, 250, 500, 1000, 2000};
constexpr std::array<double, 45> kTailProbs = {
    0.999, 0.995, 0.99,  0.98,  0.97,   0.95,   0.9,    0.85,   0.8,    0.75,   0.7,    0.65,
    0.6,   0.55,  0.5,   0.45,  0.4,    0.35,   0.3,    0.25,   0.2,    0.15,   0.1,    0.08,
    0.06,  0.05,  0.04,  0.03,  0.025,  0.02,   0.015,  0.01,   0.008,  0.006,  0.005,  0.004,
    0.003, 0.002, 0.0015, 0.001, 0.0007, 0.0005, 0.0003, 0.0002, 0.0001};

double jb_statistic(const std::vector<double>& x) {
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
    const double s = m3 / std::pow(m2, 1.5);
    const double k = m4 / (m2 * m2) - 3.0;
    return n / 6.0 * (s * s + 0.25 * k * k);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <output.inc>\n", argv[0]);
        return 2;
    }
    std::FILE* out = std::fopen(argv[1], "w");
    if (!out) {
        std::perror(argv[1]);
        return 1;
    }
    std::fprintf(out, "// Generated by mrcal_jb_table_gen: %zu null simulations per size, seed %llu.\n",
                 kSimulations, static_cast<unsigned long long>(kSeed));
    std::fprintf(out, "constexpr std::array<std::size_t, %zu> kJbLadder = {", kLadder.size());
    for (std::size_t i = 0; i < kLadder.size(); ++i) std::fprintf(out, "%s%zu", i ? ", " : "", kLadder[i]);
    std::fprintf(out, "};\n");
    std::fprintf(out, "constexpr std::array<double, %zu> kJbTailProbs = {", kTailProbs.size());
    for (std::size_t i = 0; i < kTailProbs.size(); ++i) std::fprintf(out, "%s%.17g", i ? ", " : "", kTailProbs[i]);
    std::fprintf(out, "};\n");
    std::fprintf(out, "constexpr std::array<std::array<double, %zu>, %zu> kJbQuantiles = {{\n", kTailProbs.size(),
                 kLadder.size());

    std::vector<double> stats(kSimulations);
    for (std::size_t li = 0; li < kLadder.size(); ++li) {
        const std::size_t n = kLadder[li];
        std::vector<double> sample(n);
        for (std::size_t s = 0; s < kSimulations; ++s) {
            auto rng = mrcal::path_stream(kSeed + n, s);
            mrcal::NormalSampler normal;
            for (auto& v : sample) v = normal(rng);
            stats[s] = jb_statistic(sample);
        }
        std::sort(stats.begin(), stats.end());
        std::fprintf(out, "    {{");
        for (std::size_t q = 0; q < kTailProbs.size(); ++q) {
            const double pos = (1.0 - kTailProbs[q]) * static_cast<double>(kSimulations - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, kSimulations - 1);
            const double w = pos - static_cast<double>(lo);
            const double value = (1.0 - w) * stats[lo] + w * stats[hi];
            std::fprintf(out, "%s%.17g", q ? ", " : "", value);
        }
        std::fprintf(out, "}},\n");
    }
    std::fprintf(out, "}};\n");
    std::fclose(out);
    return 0;
}
