#include <benchmark/benchmark.h>

#include "fedledger/fl/dataset.hpp"
#include "fedledger/fl/model.hpp"
#include "fedledger/fl/train.hpp"

using namespace fedledger;
using namespace fedledger::fl;

namespace {

ModelSpec spec_for(std::int64_t arch, std::size_t dim, std::size_t classes) {
  return arch == 0 ? ModelSpec::logistic(dim, classes) : ModelSpec::mlp(dim, {64}, classes);
}

}  // namespace

// MNIST-shaped inputs: 784 features, 10 classes.
static void BM_LossAndGradient(benchmark::State& state) {
  const auto data = make_blobs(static_cast<std::size_t>(state.range(1)) / 10, 10, 784, 0.3, 1);
  const auto spec = spec_for(state.range(0), 784, 10);
  const auto params = init_params(spec, 2);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(params, spec, data));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_LossAndGradient)->Args({0, 32})->Args({0, 1000})->Args({1, 32})->Args({1, 1000});

static void BM_DpApply(benchmark::State& state) {
  ParamVector g(static_cast<std::size_t>(state.range(0)), 0.5);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(dp_apply(g, {1.0, 1.0, ++seed}));
}
BENCHMARK(BM_DpApply)->Arg(7850)->Arg(50890);

static void BM_RunRound(benchmark::State& state) {
  const auto n_clients = static_cast<std::size_t>(state.range(0));
  const auto all = make_blobs(100, 10, 784, 0.3, 3);
  const auto shards = partition_iid(all, n_clients, 4);
  std::vector<ClientData> clients;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n_clients; ++i) {
    ids.push_back("C" + std::to_string(i));
    clients.push_back({ids.back(), &shards[i]});
  }
  const auto spec = ModelSpec::logistic(784, 10);
  const auto global = init_params(spec, 1);
  const TrainingHyper hyper{32, 0.1, 5, {1.0, 0.0, 9}};
  const RoundPlan plan{1, 0, 1, ids};
  for (auto _ : state) benchmark::DoNotOptimize(run_round(global, spec, clients, plan, hyper));
}
BENCHMARK(BM_RunRound)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);
