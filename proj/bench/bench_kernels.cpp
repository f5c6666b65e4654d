// Serial reference vs OpenMP kernels on a training-sized batch.
#include <benchmark/benchmark.h>

#include "hrp/kernels.hpp"
#include "hrp/rng.hpp"

namespace {

using namespace hrp;

struct Setup {
  ModelParams params;
  std::vector<std::vector<double>> inputs;
  std::vector<ForwardOutput> fwd;
  std::vector<kernels::BackwardItem> items;
  std::vector<std::vector<double>> rows;

  explicit Setup(int batch) : params(init_params(Arch{2, 64, 4, 16}, 11)) {
    Rng rng(5);
    for (int i = 0; i < batch; ++i) inputs.push_back({rng.normal(), rng.normal()});
    fwd = kernels::serial::forward_batch(params, inputs);
    for (int i = 0; i < batch; ++i) {
      items.push_back({inputs[i], &fwd[i], {0.1, -0.2, 0.05, 0.05}, std::vector<double>(16, 0.01)});
      rows.push_back(fwd[i].embedding);
    }
  }
};

template <bool Parallel>
void BM_forward(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto out = Parallel ? kernels::parallel::forward_batch(s.params, s.inputs)
                        : kernels::serial::forward_batch(s.params, s.inputs);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_backward(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto g = Parallel ? kernels::parallel::backward_sum(s.params, s.items)
                      : kernels::serial::backward_sum(s.params, s.items);
    benchmark::DoNotOptimize(g.values.data());
  }
}

template <bool Parallel>
void BM_gram(benchmark::State& state) {
  Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto g = Parallel ? kernels::parallel::gram(s.rows) : kernels::serial::gram(s.rows);
    benchmark::DoNotOptimize(g.data());
  }
}

}  // namespace

BENCHMARK(BM_forward<false>)->Name("forward/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_forward<true>)->Name("forward/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_backward<false>)->Name("backward/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_backward<true>)->Name("backward/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_gram<false>)->Name("gram/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_gram<true>)->Name("gram/parallel")->Arg(128)->Arg(512);

BENCHMARK_MAIN();
