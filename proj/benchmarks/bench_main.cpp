#include <benchmark/benchmark.h>

#include "mrcal/joint.hpp"
#include "mrcal/one_factor.hpp"
#include "mrcal/simulate.hpp"
#include "mrcal/spot_prompt.hpp"
#include "synthetic.hpp"

using namespace mrcal;

namespace {

PriceSeries history(int years) {
    return testing::simulate_one_factor(testing::seasonal_params(40.0), testing::weekday_grid(2000, years), 1);
}

void BM_ProfileLikelihood(benchmark::State& state) {
    const auto steps = to_steps(history(static_cast<int>(state.range(0))), Transform::Log);
    const mr::ProfileLikelihood lik(steps, {LevelGranularity::CalendarMonth, PeriodGranularity::Monthly});
    double a = 10.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(lik(a));
        a = a < 100.0 ? a + 0.5 : 10.0;
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(steps.size()));
}
BENCHMARK(BM_ProfileLikelihood)->Arg(1)->Arg(10)->Arg(40);

void BM_CalibrateMR(benchmark::State& state) {
    const auto prices = history(static_cast<int>(state.range(0)));
    mr::CalibrationOptions opt;
    opt.shape.level = LevelGranularity::CalendarMonth;
    for (auto _ : state) benchmark::DoNotOptimize(mr::calibrate(prices, opt).params.rate);
}
BENCHMARK(BM_CalibrateMR)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_CalibrateSP(benchmark::State& state) {
    sim::RealWorldOptions o;
    o.grid = sim::make_grid(make_timestamp(2008, 1, 1), make_timestamp(2009, 12, 31), sim::GridFrequency::Daily);
    o.seed = 2;
    const auto out = sim::simulate_sp_realworld(testing::flat_sp_params(150.0, 0.8, 0.5, 0.3), 5.0, 5.0, o);
    const auto spot = out.spot.path_series(0, "spot"), index = out.index.path_series(0, "index");
    for (auto _ : state) benchmark::DoNotOptimize(sp::calibrate_sp(spot, index).params.rate);
}
BENCHMARK(BM_CalibrateSP)->Unit(benchmark::kMillisecond);

void BM_SimulateMR(benchmark::State& state) {
    sim::MRRiskNeutralSpec spec;
    spec.a = 40.0;
    spec.sigma = sim::flat_curve(0.9);
    spec.curve = sim::ForwardCurve::flat(make_timestamp(2010, 1, 1), 5.0);
    spec.grid = sim::make_grid(make_timestamp(2010, 1, 1), make_timestamp(2010, 12, 31), sim::GridFrequency::Weekdays);
    spec.n_paths = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_mr(spec).n_paths);
    state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(spec.grid.size()));
}
BENCHMARK(BM_SimulateMR)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_SimulateSP(benchmark::State& state) {
    sim::SPRiskNeutralSpec spec;
    spec.a = 150.0;
    spec.b = 0.5;
    spec.curves = {sim::flat_curve(0.8), sim::flat_curve(0.5), sim::flat_curve(0.3)};
    spec.curve = sim::ForwardCurve::flat(make_timestamp(2010, 1, 1), 5.0);
    spec.grid = sim::make_grid(make_timestamp(2010, 1, 1), make_timestamp(2010, 12, 31), sim::GridFrequency::Daily);
    spec.n_paths = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_sp(spec).rolls.size());
    state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(spec.grid.size()));
}
BENCHMARK(BM_SimulateSP)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
