#include <benchmark/benchmark.h>

#include "digirl/cli/pipeline.hpp"
#include "digirl/policy/features.hpp"
#include "digirl/synthdevice/planner.hpp"

using namespace digirl;

namespace {

const cli::World& world() {
  static const auto w = cli::World::make(1, synthdevice::EnvConfig{}, 438, 96);
  return w;
}

core::Observation home_obs() {
  synthdevice::DeviceEnv env(world().graph, world().env.deterministic());
  return env.reset(world().tasks.train[0]);
}

void BM_Featurize(benchmark::State& st) {
  const auto o = home_obs();
  const auto& task = world().tasks.train[0];
  for (auto _ : st) benchmark::DoNotOptimize(policy::featurize(o, task));
}
BENCHMARK(BM_Featurize);

void BM_Sample(benchmark::State& st) {
  const auto phi = policy::featurize(home_obs(), world().tasks.train[0]);
  const policy::PolicySnapshot p;
  core::Rng rng(1);
  for (auto _ : st) benchmark::DoNotOptimize(p.sample(phi, 1.0, rng));
}
BENCHMARK(BM_Sample);

void BM_MleUpdate(benchmark::State& st) {
  synthdevice::DeviceEnv env(world().graph, world().env.deterministic());
  std::vector<policy::Example> batch;
  for (const auto& task : world().tasks.train) {
    auto o = env.reset(task);
    for (const auto& a : synthdevice::oracle_shortest_path(env, task)) {
      batch.push_back({policy::featurize(o, task), a});
      if (batch.size() == static_cast<std::size_t>(st.range(0))) break;
    }
    if (batch.size() == static_cast<std::size_t>(st.range(0))) break;
  }
  policy::PolicySnapshot p;
  for (auto _ : st) p = policy::mle_update(std::move(p), batch, 0.1, 100.0);
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_MleUpdate)->Arg(32)->Arg(128);

void BM_EnvStep(benchmark::State& st) {
  synthdevice::DeviceEnv env(world().graph, world().env);
  core::Rng rng(3);
  const auto& task = world().tasks.train[5];
  env.reset(task);
  const auto a = core::Action::press(core::Button::Back);
  for (auto _ : st) {
    if (env.done()) env.reset(task);
    benchmark::DoNotOptimize(env.step(a, rng));
  }
}
BENCHMARK(BM_EnvStep);

void BM_FarmCollect(benchmark::State& st) {
  const policy::PolicySnapshot p;
  const auto workers = farm::make_workers(static_cast<int>(st.range(0)), 1, 3000.0);
  farm::FarmConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(farm::collect(p, world().tasks.train, workers, 64, world().factory(), cfg));
  st.SetItemsProcessed(st.iterations() * 64);
}
BENCHMARK(BM_FarmCollect)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
