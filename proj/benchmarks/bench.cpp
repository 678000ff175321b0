#include <benchmark/benchmark.h>

#include "mva/geometry.hpp"
#include "mva/networks.hpp"
#include "mva/rng.hpp"

namespace {

mva::Tensor random_tensor(std::vector<int> shape, mva::Rng& rng) {
    mva::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1, 1);
    return t;
}

void bm_conv2d_forward(benchmark::State& state) {
    mva::Rng rng(7);
    const int c = static_cast<int>(state.range(0));
    mva::ad::Var x = mva::ad::constant(random_tensor({c, 32, 32}, rng));
    mva::ad::Var k = mva::ad::leaf(random_tensor({c, c, 3, 3}, rng));
    for (auto _ : state) {
        benchmark::DoNotOptimize(mva::ad::conv2d(x, k, 1, 1));
    }
}
BENCHMARK(bm_conv2d_forward)->Arg(16)->Arg(64);

void bm_conv2d_backward(benchmark::State& state) {
    mva::Rng rng(7);
    const int c = static_cast<int>(state.range(0));
    mva::Tensor xt = random_tensor({c, 32, 32}, rng);
    mva::Tensor kt = random_tensor({c, c, 3, 3}, rng);
    for (auto _ : state) {
        mva::ad::Var x = mva::ad::leaf(xt);
        mva::ad::Var k = mva::ad::leaf(kt);
        mva::ad::backward(mva::ad::sum(mva::ad::conv2d(x, k, 1, 1)));
    }
}
BENCHMARK(bm_conv2d_backward)->Arg(16)->Arg(64);

void bm_hourglass_forward(benchmark::State& state) {
    mva::Rng rng(7);
    mva::HourglassConfig cfg;
    cfg.scales = 2;
    cfg.channels = static_cast<int>(state.range(0));
    cfg.input_size = 64;
    cfg.heatmap_channels = 68;
    mva::MhmModel model(cfg, rng);
    mva::Tensor face = random_tensor({3, 64, 64}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.predict(face));
    }
}
BENCHMARK(bm_hourglass_forward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void bm_nms(benchmark::State& state) {
    mva::Rng rng(7);
    std::vector<mva::Box> boxes;
    for (int i = 0; i < state.range(0); ++i) {
        const double x = rng.uniform(0, 400), y = rng.uniform(0, 400);
        const double s = rng.uniform(10, 60);
        mva::Box b{x, y, x + s, y + s};
        b.score = rng.uniform();
        boxes.push_back(b);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(mva::nms(boxes, 0.5));
    }
}
BENCHMARK(bm_nms)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
