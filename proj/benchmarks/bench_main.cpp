// Microbenchmarks for the hot paths: payload embedding/extraction, weight
// (un)packing, network forward/backward, feature extraction and detector
// fitting. Sizes follow the stock 2-8-8-2 carrier (114 parameters) plus one
// larger carrier so scaling is visible.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "stegozoo/detectkit.hpp"
#include "stegozoo/featurex.hpp"
#include "stegozoo/netcore.hpp"
#include "stegozoo/rng.hpp"
#include "stegozoo/stegattack.hpp"
#include "stegozoo/tensorstore.hpp"

using namespace stegozoo;

namespace {

store::ModelRecord make_model(const std::string& arch, std::uint64_t seed) {
    return net::Network(store::Arch::parse(arch), seed).to_model_record();
}

const store::ModelRecord& small_model() {
    static const store::ModelRecord m = make_model("2-8-8-2", 1);
    return m;
}

const store::ModelRecord& large_model() {
    static const store::ModelRecord m = make_model("64-128-64-10", 2);  // ~25k params
    return m;
}

const attack::Payload& payload4k() {
    static const attack::Payload p = attack::Payload::random(7, 4096);
    return p;
}

void bench_embed_fill(benchmark::State& state, const store::ModelRecord& m) {
    const int x = static_cast<int>(state.range(0));
    const attack::AttackSpec spec(x, attack::AttackMode::Fill);
    for (auto _ : state) {
        benchmark::DoNotOptimize(attack::embed_fill(m, spec, payload4k()));
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(m.weight_count()));
}

void BM_embed_fill_small(benchmark::State& state) { bench_embed_fill(state, small_model()); }
void BM_embed_fill_large(benchmark::State& state) { bench_embed_fill(state, large_model()); }

void BM_extract(benchmark::State& state) {
    const int x = static_cast<int>(state.range(0));
    const store::ModelRecord attacked =
        attack::embed_fill(small_model(), attack::AttackSpec(x, attack::AttackMode::Fill),
                           payload4k());
    const std::size_t bits = attack::capacity_bits(attacked, x);
    for (auto _ : state) {
        benchmark::DoNotOptimize(attack::extract(attacked, x, bits));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(bits));
}

void BM_flatten_unflatten(benchmark::State& state) {
    const store::ModelRecord& m = large_model();
    for (auto _ : state) {
        benchmark::DoNotOptimize(store::unflatten(m, store::flatten(m)));
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(m.weight_count()));
}

void BM_to_bitmatrix(benchmark::State& state) {
    const store::WeightVector w = store::flatten(large_model());
    for (auto _ : state) {
        benchmark::DoNotOptimize(store::to_bitmatrix(w));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}

void BM_forward(benchmark::State& state) {
    const net::Network net = net::Network::from_model_record(small_model());
    const std::vector<double> x = {0.3, -0.7};
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.forward(x));
    }
}

void BM_backprop(benchmark::State& state) {
    const net::Network net = net::Network::from_model_record(small_model());
    const std::vector<double> x = {0.0, 0.0};
    const std::vector<double> target = {0.0, 0.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.backprop(x, target, net::Loss::Mse));
    }
}

void BM_gradient_feature(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(feat::gradient_feature(small_model()));
    }
}

// Synthetic two-class feature table shaped like a weights dataset slice.
void make_table(std::size_t rows, std::size_t dim, std::vector<std::vector<double>>& x,
                std::vector<int>& y) {
    Rng rng(99);
    x.clear();
    y.clear();
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<double> row(dim);
        const int cls = static_cast<int>(i % 2);
        for (double& v : row) v = rng.normal() + (cls ? 0.3 : 0.0);
        x.push_back(std::move(row));
        y.push_back(cls);
    }
}

void bench_fit(benchmark::State& state, detect::EnsembleVariant variant) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    make_table(160, 114, x, y);
    detect::EnsembleConfig cfg;
    cfg.rf_trees = 50;
    cfg.gb_rounds = 50;
    for (auto _ : state) {
        benchmark::DoNotOptimize(detect::TreeEnsemble::fit(x, y, variant, cfg, 3));
    }
}

void BM_fit_rf(benchmark::State& state) { bench_fit(state, detect::EnsembleVariant::Rf); }
void BM_fit_gb(benchmark::State& state) { bench_fit(state, detect::EnsembleVariant::Gb); }
void BM_fit_hgb(benchmark::State& state) { bench_fit(state, detect::EnsembleVariant::Hgb); }

}  // namespace

BENCHMARK(BM_embed_fill_small)->Arg(1)->Arg(8)->Arg(23);
BENCHMARK(BM_embed_fill_large)->Arg(8);
BENCHMARK(BM_extract)->Arg(1)->Arg(8)->Arg(23);
BENCHMARK(BM_flatten_unflatten);
BENCHMARK(BM_to_bitmatrix);
BENCHMARK(BM_forward);
BENCHMARK(BM_backprop);
BENCHMARK(BM_gradient_feature);
BENCHMARK(BM_fit_rf)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fit_gb)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fit_hgb)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
