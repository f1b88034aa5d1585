#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "uwz/lattice.hpp"
#include "uwz/polar.hpp"
#include "uwz/rng.hpp"

using namespace uwz;

static void BM_Transform(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    std::vector<std::uint8_t> u(n);
    for (auto& b : u) b = rng.bits() & 1u;
    for (auto _ : state) {
        auto x = polar::transform(u);
        benchmark::DoNotOptimize(x.data());
    }
    state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(BM_Transform)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

static void BM_ScPassSingleTrack(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    std::vector<double> leaf(n * 2);
    for (std::size_t j = 0; j < n; ++j) {
        const double a = 0.05 + 0.9 * rng.uniform01();
        leaf[2 * j] = a;
        leaf[2 * j + 1] = 1.0 - a;
    }
    polar::ScEngine engine(n, 1);
    std::vector<std::uint8_t> u, x;
    polar::ScEngine::Policy pol = [](std::size_t, const double* p) {
        return p[1] > p[0] ? 1 : 0;
    };
    for (auto _ : state) {
        engine.run(leaf, pol, u, x, nullptr);
        benchmark::DoNotOptimize(u.data());
    }
    state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(BM_ScPassSingleTrack)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

static void BM_ResidueWeights(benchmark::State& state) {
    const auto lat = lattice::make_lattice(12);
    const auto spec = lattice::make_dg(lat, 2.0);
    std::vector<double> q;
    double obs = 0.7;
    for (auto _ : state) {
        lattice::detail::residue_weights_gaussian(spec, 9, obs, 1.3, q);
        benchmark::DoNotOptimize(q.data());
        obs = -obs;
    }
}
BENCHMARK(BM_ResidueWeights);

static void BM_MultilevelCovering(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const int ell = 6;
    const auto lat = lattice::make_lattice(8);
    polar::CodeChannel chan{lattice::make_dg(lat, 1.5), 0.6, 2.0};

    polar::CodeSets sets;
    sets.n = n;
    sets.ell = ell;
    sets.levels.resize(ell);
    for (auto& lv : sets.levels) {
        lv.f1.assign(n, 0);
        lv.i2.assign(n, 0);
        lv.f1_det.assign(n, 0);
    }
    Rng rng(3);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal(0.0, 1.6);
    Rng erng(4);
    for (auto _ : state) {
        auto res = polar::covering_encode(x, sets, chan, 7, 1, erng);
        benchmark::DoNotOptimize(res.payload.data());
    }
    state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(BM_MultilevelCovering)->RangeMultiplier(2)->Range(512, 8192)->Complexity();

BENCHMARK_MAIN();
