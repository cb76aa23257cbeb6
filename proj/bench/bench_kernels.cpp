// Serial reference kernels against the OpenMP kernels on training-sized shapes.
// The thread count is the benchmark argument; results are bitwise equal either way.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tslearn/kernels.hpp"

namespace kn = tsl::kernels;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

// 32 images of 3x32x32 through a 5x5 convolution to 6 channels.
const kn::ConvGeometry kConv{32, 3, 32, 32, 6, 5, 5, 1, 0};
const kn::LinearGeometry kLinear{128, 400, 120};
const kn::PoolGeometry kPool{32, 16, 28, 28, 2, 2};

struct ConvData {
    std::vector<float> x = noise(kConv.batch * kConv.in_channels * kConv.height * kConv.width, 1);
    std::vector<float> k = noise(kConv.out_channels * kConv.in_channels * kConv.kernel_h * kConv.kernel_w, 2);
    std::vector<float> b = noise(kConv.out_channels, 3);
    std::vector<float> gy = noise(kConv.batch * kConv.out_channels * kConv.out_h() * kConv.out_w(), 4);
    std::vector<float> y = std::vector<float>(gy.size());
    std::vector<float> gx = std::vector<float>(x.size()), gk = std::vector<float>(k.size()), gb = std::vector<float>(b.size());
};

void conv_forward_reference(benchmark::State& state) {
    ConvData d;
    for (auto _ : state) {
        kn::reference::conv2d_forward<float>(kConv, d.x, d.k, d.b, d.y);
        benchmark::DoNotOptimize(d.y.data());
    }
}

void conv_forward_parallel(benchmark::State& state) {
    kn::set_num_threads(static_cast<int>(state.range(0)));
    ConvData d;
    for (auto _ : state) {
        kn::conv2d_forward<float>(kConv, d.x, d.k, d.b, d.y);
        benchmark::DoNotOptimize(d.y.data());
    }
}

void conv_backward_reference(benchmark::State& state) {
    ConvData d;
    for (auto _ : state) {
        kn::reference::conv2d_backward<float>(kConv, d.x, d.k, d.gy, d.gx, d.gk, d.gb);
        benchmark::DoNotOptimize(d.gk.data());
    }
}

void conv_backward_parallel(benchmark::State& state) {
    kn::set_num_threads(static_cast<int>(state.range(0)));
    ConvData d;
    for (auto _ : state) {
        kn::conv2d_backward<float>(kConv, d.x, d.k, d.gy, d.gx, d.gk, d.gb);
        benchmark::DoNotOptimize(d.gk.data());
    }
}

struct LinearData {
    std::vector<float> x = noise(kLinear.rows * kLinear.inner, 5);
    std::vector<float> w = noise(kLinear.inner * kLinear.columns, 6);
    std::vector<float> b = noise(kLinear.columns, 7);
    std::vector<float> gy = noise(kLinear.rows * kLinear.columns, 8);
    std::vector<float> y = std::vector<float>(gy.size());
    std::vector<float> gx = std::vector<float>(x.size()), gw = std::vector<float>(w.size()), gb = std::vector<float>(b.size());
};

void linear_reference(benchmark::State& state) {
    LinearData d;
    for (auto _ : state) {
        kn::reference::linear_forward<float>(kLinear, d.x, d.w, d.b, d.y);
        kn::reference::linear_backward<float>(kLinear, d.x, d.w, d.gy, d.gx, d.gw, d.gb);
        benchmark::DoNotOptimize(d.gw.data());
    }
}

void linear_parallel(benchmark::State& state) {
    kn::set_num_threads(static_cast<int>(state.range(0)));
    LinearData d;
    for (auto _ : state) {
        kn::linear_forward<float>(kLinear, d.x, d.w, d.b, d.y);
        kn::linear_backward<float>(kLinear, d.x, d.w, d.gy, d.gx, d.gw, d.gb);
        benchmark::DoNotOptimize(d.gw.data());
    }
}

struct PoolData {
    std::vector<float> x = noise(kPool.batch * kPool.channels * kPool.height * kPool.width, 9);
    std::vector<float> y = std::vector<float>(kPool.batch * kPool.channels * kPool.out_h() * kPool.out_w());
    std::vector<std::size_t> arg = std::vector<std::size_t>(y.size());
};

void maxpool_reference(benchmark::State& state) {
    PoolData d;
    for (auto _ : state) {
        kn::reference::maxpool2d_forward<float>(kPool, d.x, d.y, d.arg);
        benchmark::DoNotOptimize(d.y.data());
    }
}

void maxpool_parallel(benchmark::State& state) {
    kn::set_num_threads(static_cast<int>(state.range(0)));
    PoolData d;
    for (auto _ : state) {
        kn::maxpool2d_forward<float>(kPool, d.x, d.y, d.arg);
        benchmark::DoNotOptimize(d.y.data());
    }
}

}  // namespace

BENCHMARK(conv_forward_reference);
BENCHMARK(conv_forward_parallel)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(conv_backward_reference);
BENCHMARK(conv_backward_parallel)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(linear_reference);
BENCHMARK(linear_parallel)->Arg(1)->Arg(2)->Arg(4);
BENCHMARK(maxpool_reference);
BENCHMARK(maxpool_parallel)->Arg(1)->Arg(2)->Arg(4);

BENCHMARK_MAIN();
