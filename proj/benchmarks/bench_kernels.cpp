// Microbenchmarks at the compressed working shape (30 x 30 x 3 tensors,
// ranks 2 + (5, 4, 4)) that the multi-start pipeline spends its time in.

#include <benchmark/benchmark.h>

#include "ccpd/analysis.hpp"
#include "ccpd/log.hpp"
#include "ccpd/reproducibility.hpp"
#include "ccpd/rng.hpp"
#include "ccpd/solver.hpp"

namespace {

using ccpd::Index;

ccpd::SyntheticSpec working_shape_spec() {
    ccpd::SyntheticSpec spec;
    spec.subjects = 30;
    spec.voxels = 30;
    spec.times = {3, 3, 3};
    spec.ranks = ccpd::Ranks(2, {5, 4, 4});
    spec.collinearity = 0.3;
    spec.noise_snr_db = 20.0;
    spec.seed = 99;
    return spec;
}

Eigen::MatrixXd random_matrix(ccpd::Rng& rng, Index rows, Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
    return m;
}

void BM_khatri_rao(benchmark::State& state) {
    ccpd::Rng rng(1);
    const Eigen::MatrixXd a = random_matrix(rng, state.range(0), 8);
    const Eigen::MatrixXd b = random_matrix(rng, 30, 8);
    for (auto _ : state) benchmark::DoNotOptimize(ccpd::khatri_rao(a, b));
}
BENCHMARK(BM_khatri_rao)->Arg(3)->Arg(30)->Arg(300);

void BM_unfold_mode2(benchmark::State& state) {
    ccpd::Rng rng(2);
    const Index n = state.range(0);
    std::vector<double> data(static_cast<std::size_t>(n * n * 3));
    for (auto& v : data) v = rng.normal();
    const ccpd::Tensor3 t(n, n, 3, std::move(data));
    for (auto _ : state) benchmark::DoNotOptimize(ccpd::unfold(t, 2));
}
BENCHMARK(BM_unfold_mode2)->Arg(30)->Arg(100);

void BM_cp_reconstruct(benchmark::State& state) {
    ccpd::Rng rng(3);
    const ccpd::CpModel model{random_matrix(rng, 30, 7), random_matrix(rng, 30, 7),
                              random_matrix(rng, 3, 7)};
    for (auto _ : state) benchmark::DoNotOptimize(ccpd::cp_reconstruct(model));
}
BENCHMARK(BM_cp_reconstruct);

void BM_cost(benchmark::State& state) {
    const auto synth = ccpd::generate_synthetic(working_shape_spec());
    const auto theta = ccpd::init_random(30, 30, {3, 3, 3}, ccpd::Ranks(2, {5, 4, 4}), 7);
    for (auto _ : state) benchmark::DoNotOptimize(ccpd::cost(theta, synth.data, 1e6));
}
BENCHMARK(BM_cost);

void BM_update_subjects(benchmark::State& state) {
    const auto synth = ccpd::generate_synthetic(working_shape_spec());
    auto theta = ccpd::init_random(30, 30, {3, 3, 3}, ccpd::Ranks(2, {5, 4, 4}), 7);
    for (auto _ : state) {
        ccpd::update_subjects(theta, synth.data);
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_update_subjects);

void BM_update_voxels_qn(benchmark::State& state) {
    const auto synth = ccpd::generate_synthetic(working_shape_spec());
    auto theta = ccpd::init_random(30, 30, {3, 3, 3}, ccpd::Ranks(2, {5, 4, 4}), 7);
    for (auto _ : state) {
        ccpd::update_voxels(theta, synth.data, 1e6, {});
        benchmark::ClobberMemory();
    }
}
BENCHMARK(BM_update_voxels_qn);

void BM_bcd_solve_full(benchmark::State& state) {
    const auto synth = ccpd::generate_synthetic(working_shape_spec());
    ccpd::SolverConfig config;
    config.ranks = ccpd::Ranks(2, {5, 4, 4});
    config.lambda = 1e6;
    config.max_iters = static_cast<int>(state.range(0));
    config.rel_tol = 1e-8;
    for (auto _ : state) {
        config.seed += 1;
        benchmark::DoNotOptimize(ccpd::bcd_solve(synth.data, config));
    }
}
BENCHMARK(BM_bcd_solve_full)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_pdistance(benchmark::State& state) {
    const auto synth = ccpd::generate_synthetic(working_shape_spec());
    ccpd::SolverConfig config;
    config.ranks = ccpd::Ranks(2, {5, 4, 4});
    config.lambda = 1e6;
    config.max_iters = 30;
    const auto a = ccpd::bcd_solve(synth.data, config);
    config.seed = 1;
    const auto b = ccpd::bcd_solve(synth.data, config);
    for (auto _ : state) benchmark::DoNotOptimize(ccpd::pdistance(a, b));
}
BENCHMARK(BM_pdistance);

} // namespace

int main(int argc, char** argv) {
    ccpd::log::set_threshold(ccpd::log::Level::Error);
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
