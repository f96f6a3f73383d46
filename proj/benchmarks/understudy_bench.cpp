#include <benchmark/benchmark.h>

#include "understudy/bayes_net.hpp"
#include "understudy/dsep.hpp"
#include "understudy/evaluation.hpp"
#include "understudy/model.hpp"
#include "understudy/network_io.hpp"
#include "understudy/training.hpp"

namespace {

using namespace understudy;

const DiscreteBayesNet& asia() {
  static const DiscreteBayesNet net = load_network(UNDERSTUDY_BENCH_DATA_DIR "/asia.json");
  return net;
}

void BM_VariableElimination(benchmark::State& state) {
  const auto& net = asia();
  Assignment evidence = empty_assignment(7);
  evidence[net.dag().index_of("dysp")] = 0;
  evidence[net.dag().index_of("xray")] = 1;
  const std::size_t target = net.dag().index_of("lung");
  for (auto _ : state) benchmark::DoNotOptimize(variable_elimination(net, evidence, target));
}
BENCHMARK(BM_VariableElimination);

void BM_EnumerateRelations(benchmark::State& state) {
  const auto& net = asia();
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_relations(net.dag()));
}
BENCHMARK(BM_EnumerateRelations);

void BM_TotalQuerySet(benchmark::State& state) {
  const auto& net = asia();
  for (auto _ : state) benchmark::DoNotOptimize(build_total_query_set(net));
}
BENCHMARK(BM_TotalQuerySet)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto& net = asia();
  const Layout layout = Layout::from_dag(net.dag());
  Rng rng(1);
  const auto params = init_model(layout, static_cast<std::size_t>(state.range(0)), rng);
  const auto data = forward_sample(net, rng, 16);
  std::vector<MaskedInstance> batch;
  for (const auto& r : data.records) batch.push_back(encode(r, sample_mask(7, rng)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_grads(params, layout, std::span<const MaskedInstance>(batch)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_ForwardBackward)->Arg(50)->Arg(200);

void BM_TrainingEpoch(benchmark::State& state) {
  const auto& net = asia();
  const auto relations = enumerate_relations(net.dag());
  const auto data = forward_sample(net, 2, 1000);
  TrainConfig config;
  config.epochs = 1;
  config.strategy = static_cast<Strategy>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_understudy(net.dag(), data, config, relations));
  }
  state.SetLabel(std::string(strategy_name(config.strategy)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_TrainingEpoch)
    ->Arg(static_cast<int>(Strategy::kPlain))
    ->Arg(static_cast<int>(Strategy::kReg))
    ->Arg(static_cast<int>(Strategy::kCor))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
