#include <benchmark/benchmark.h>

#include "driftlab/numkern.hpp"
#include "driftlab/rcp.hpp"
#include "driftlab/rng.hpp"

namespace {

using namespace driftlab;

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({r, c});
  for (double& v : t.vec()) v = rng.gaussian();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = (std::size_t)state.range(0);
  Tensor a = random_matrix(n, n, 1);
  Tensor b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * (std::int64_t)(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(1024);

void BM_SoftmaxRows(benchmark::State& state) {
  const auto n = (std::size_t)state.range(0);
  Tensor x = random_matrix(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_rows(x));
}
BENCHMARK(BM_SoftmaxRows)->Arg(64)->Arg(256)->Arg(1024);

void BM_Intervene(benchmark::State& state) {
  const auto w = (std::size_t)state.range(0);
  const std::size_t e = 16;
  rcp::WindowConfig cfg{w, 0.2, false, true};
  Tensor q = random_matrix(w, e, 4);
  Tensor k = random_matrix(w, e, 5);
  Tensor v = random_matrix(w, e, 6);
  for (auto _ : state) benchmark::DoNotOptimize(rcp::intervene(q, k, v, cfg));
}
BENCHMARK(BM_Intervene)->Arg(64)->Arg(256)->Arg(1024);

void BM_TrainStep(benchmark::State& state) {
  const auto w = (std::size_t)state.range(0);
  Rng root(9);
  stream::SourceModel src = stream::make_orthogonal_source(10, 32, 0.25, 3, 3.0, root.child("source"));
  stream::DriftSchedule schedule;
  stream::AugConfig aug{0.1, 0.9, 1.1, 0.1};
  model::MlpSpec enc{{32, 64, 16}};
  model::HeadSpec head{16, 16};
  rcp::OptimConfig oc;
  oc.total_steps = 1000;
  rcp::TrainState st{model::init_params(enc, head, root.child("init")), rcp::AdamW(oc), "bench"};
  rcp::WindowConfig win{w, 0.2, false, true};
  std::uint64_t t = 0;
  for (auto _ : state) {
    stream::StreamBatch batch = stream::sample_batch(src, schedule, t, w, root.child("s").child(t));
    benchmark::DoNotOptimize(rcp::train_step(st, batch, aug, win, root.child("t").child(t)));
    ++t;
  }
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
