// Serial reference path vs OpenMP kernels for the two hot spots: Monte-Carlo
// ATFS simulation and the shared smoothed-state table.
#include <benchmark/benchmark.h>

#include "earlywarn/calibrate.hpp"
#include "earlywarn/mewma.hpp"
#include "earlywarn/panel.hpp"

using namespace earlywarn;

namespace {

NullModel make_null(int d) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(d, d, 0.3);
    cov.diagonal().setOnes();
    std::vector<std::string> names;
    for (int i = 0; i < d; ++i) names.push_back("x" + std::to_string(i));
    return NullModel::from_moments(names, Eigen::VectorXd::Zero(d), cov, 100);
}

void BM_SimulateAtfs(benchmark::State& state, Execution execution) {
    const NullModel null = make_null(static_cast<int>(state.range(0)));
    SimulationOptions opts;
    opts.simulations = 1000;
    opts.sequence_length = 200;
    opts.execution = execution;
    for (auto _ : state) benchmark::DoNotOptimize(simulate_atfs(null, 0.3, 8.0, opts).atfs);
    state.SetItemsProcessed(state.iterations() * opts.simulations * opts.sequence_length);
}

void BM_StateTable(benchmark::State& state, Execution execution) {
    SyntheticPanelSpec spec;
    spec.predictor_count = static_cast<int>(state.range(0));
    const AlignedPanel panel = generate_synthetic(spec);
    const Eigen::MatrixXd x = observation_matrix(panel, panel.candidate_names());
    const Eigen::VectorXd mean = x.colwise().mean();
    for (auto _ : state) {
        SharedStateTable table(x, mean, default_lambda_grid(), {}, execution);
        benchmark::DoNotOptimize(table.value_count());
    }
}

}  // namespace

BENCHMARK_CAPTURE(BM_SimulateAtfs, serial, Execution::serial)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SimulateAtfs, parallel, Execution::parallel)->Arg(1)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_StateTable, serial, Execution::serial)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_StateTable, parallel, Execution::parallel)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
