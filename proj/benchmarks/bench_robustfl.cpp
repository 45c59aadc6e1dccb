#include <benchmark/benchmark.h>

#include <vector>

#include "robustfl/aggregation.hpp"
#include "robustfl/data.hpp"
#include "robustfl/mlp.hpp"
#include "robustfl/simulation.hpp"

using namespace robustfl;

namespace {

struct Round {
  MlpArchitecture arch = default_architecture(16, 4);
  std::vector<ModelParams> models;
  ModelParams global;
  LabeledBatch server;
  DummySet dummy;

  explicit Round(std::size_t m) {
    Rng rng(7);
    global = glorot_init(arch, rng);
    for (std::size_t i = 0; i < m; ++i) models.push_back(glorot_init(arch, rng));
    const Dataset data = generate_synthetic(4, 10, 16, 3);
    server = data.train;
    dummy = generate_dummies(16, 16, 5);
  }
};

void BM_Aggregate(benchmark::State& state, RuleKind rule) {
  const std::size_t m = static_cast<std::size_t>(state.range(0));
  const Round round(m);
  const RuleConfig cfg{rule, 2, &round.server, &round.dummy};
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(round.models, round.global, cfg));
}

BENCHMARK_CAPTURE(BM_Aggregate, fedavg, RuleKind::FedAvg)->Arg(10)->Arg(30);
BENCHMARK_CAPTURE(BM_Aggregate, krum, RuleKind::Krum)->Arg(10)->Arg(30);
BENCHMARK_CAPTURE(BM_Aggregate, trimmed_mean, RuleKind::TrimmedMean)->Arg(10)->Arg(30);
BENCHMARK_CAPTURE(BM_Aggregate, fang, RuleKind::Fang)->Arg(10)->Arg(30);
BENCHMARK_CAPTURE(BM_Aggregate, dummy_contrastive, RuleKind::DummyContrastive)->Arg(10)->Arg(30);

void BM_Backward(benchmark::State& state) {
  const MlpArchitecture arch = default_architecture(16, 4);
  Rng rng(3);
  const ModelParams model = glorot_init(arch, rng);
  const Dataset data = generate_synthetic(4, 40, 16, 3);
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15,
                                     16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31};
  const LabeledBatch batch = gather(data.train, idx);
  for (auto _ : state) benchmark::DoNotOptimize(backward(model, batch));
}
BENCHMARK(BM_Backward);

void BM_LocalTrain(benchmark::State& state) {
  ExperimentConfig cfg;
  const Dataset data = generate_synthetic(4, 50, 16, 3);
  DeviceState device{0, DeviceRole::Benign, {}, data.train, 11};
  Rng init(1);
  const ModelParams global = glorot_init(cfg.architecture(), init);
  for (auto _ : state) {
    Rng rng(2);
    benchmark::DoNotOptimize(local_train(device, global, cfg, rng));
  }
}
BENCHMARK(BM_LocalTrain);

}  // namespace
BENCHMARK_MAIN();
