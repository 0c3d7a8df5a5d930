#include "digirl/cli/pipeline.hpp"

#include "digirl/core/error.hpp"
#include "digirl/synthdevice/planner.hpp"

namespace digirl::cli {

World World::make(std::uint64_t seed, const synthdevice::EnvConfig& env, int n_train, int n_test) {
  World w;
  w.env = env;
  w.env.seed = seed;
  w.graph = std::make_shared<const synthdevice::ScreenGraph>(synthdevice::ScreenGraph::generate(seed, env.grid));
  w.tasks = synthdevice::generate_tasks(seed, n_train, n_test);
  return w;
}

farm::EnvFactory World::factory() const {
  return [graph = graph, env = env](const farm::WorkerSpec&) {
    return std::make_unique<synthdevice::DeviceEnv>(graph, env);
  };
}

farm::EnvFactory World::deterministic_factory() const {
  return [graph = graph, env = env.deterministic()](const farm::WorkerSpec&) {
    return std::make_unique<synthdevice::DeviceEnv>(graph, env);
  };
}

Harness::Harness(World world, core::RunConfig cfg, FarmSetup farm, std::uint64_t seed)
    : world_(std::move(world)), cfg_(cfg), farm_(farm), seed_(seed) {
  cfg_.validate();
  if (cfg_.horizon != world_.env.horizon) throw ConfigError("run horizon and environment horizon differ");
}

std::int64_t Harness::epoch() const {
  if (world_.env.drift_period == synthdevice::EnvConfig::kNoDrift) return 0;
  return clock_ / world_.env.drift_period;
}

farm::FarmRun Harness::collect(const policy::PolicySnapshot& p, int n, std::uint64_t stream) {
  auto rng = core::derive_rng(seed_, {0xc011, stream});
  std::vector<core::Task> tasks;
  tasks.reserve(static_cast<std::size_t>(n));
  const auto& train = world_.tasks.train;
  for (int i = 0; i < n; ++i) tasks.push_back(train[core::uniform_index(rng, train.size())]);
  farm::FarmConfig fc;
  fc.seed = core::hash_words({seed_, 0xc011, stream});
  fc.temperature = cfg_.temperature;
  fc.episode_base = clock_;
  fc.reward_noise = cfg_.reward_noise;
  auto run = farm::collect(p, tasks, farm::make_workers(farm_.workers, seed_, farm_.latency_ms, farm_.faults), n,
                           world_.factory(), fc);
  clock_ += n;
  return run;
}

EvalSummary Harness::evaluate_at(std::int64_t clock, const policy::PolicySnapshot& p,
                                 const std::vector<core::Task>& tasks, int n, std::uint64_t stream,
                                 bool classify) const {
  farm::FarmConfig fc;
  fc.seed = core::hash_words({seed_, 0xe7a1, stream});
  fc.temperature = cfg_.temperature;
  fc.episode_base = clock;
  fc.pin_clock = true;
  fc.record_traces = classify;
  auto run = farm::collect(p, tasks, farm::make_workers(farm_.workers, seed_, farm_.latency_ms), n,
                           world_.factory(), fc);
  EvalSummary s;
  s.rollouts = static_cast<int>(run.trajectories.size());
  s.success = run.true_success_rate();
  std::array<int, 3> n_d{}, k_d{};
  for (std::size_t i = 0; i < run.trajectories.size(); ++i) {
    const auto d = static_cast<std::size_t>(run.trajectories[i].task.difficulty - 1);
    ++n_d[d];
    k_d[d] += run.true_success[i] ? 1 : 0;
  }
  for (std::size_t d = 0; d < 3; ++d) s.by_difficulty[d] = n_d[d] ? static_cast<double>(k_d[d]) / n_d[d] : 0.0;
  if (classify) {
    for (std::size_t i = 0; i < run.trajectories.size(); ++i) {
      s.failures.add(evaluator::classify_failure(run.trajectories[i], run.traces[i], *world_.graph));
    }
  }
  s.trajectories = std::move(run.trajectories);
  return s;
}

std::vector<core::Trajectory> Harness::oracle_demos(int per_task) const {
  std::vector<core::Trajectory> out;
  synthdevice::DeviceEnv env(world_.graph, world_.env.deterministic());
  auto rng = core::derive_rng(seed_, {0xde70});
  std::int64_t counter = 0;
  for (int k = 0; k < per_task; ++k) {
    for (const auto& task : world_.tasks.train) {
      env.set_episode_counter(counter++);
      std::vector<core::Action> plan;
      std::size_t next = 0;
      synthdevice::ActFn act = [&](const core::Observation&, const core::Task& t, core::Rng&) {
        if (next == 0) plan = synthdevice::oracle_shortest_path(env, t);
        if (next >= plan.size()) throw InvariantError("oracle plan ran out before the goal");
        return plan[next++];
      };
      auto traj = synthdevice::run_episode(env, task, act, rng);
      if (!traj.succeeded()) throw InvariantError("oracle demonstration failed for task " + std::to_string(task.id));
      out.push_back(std::move(traj));
    }
  }
  return out;
}

algo::Agent Harness::bc_on_demos(int per_task) const {
  auto demos = oracle_demos(per_task);
  auto rng = core::derive_rng(seed_, {0xbc});
  return algo::run_offline(algo::AlgoVariant{algo::AlgoVariant::FilteredBC}, demos, cfg_, algo::Agent::fresh(), rng);
}

algo::OnlineHooks Harness::hooks(std::uint64_t stream, bool evaluate_test) {
  algo::OnlineHooks h;
  h.collect = [this, stream](const policy::PolicySnapshot& p, int n, int it) {
    auto run = collect(p, n, core::hash_words({stream, static_cast<std::uint64_t>(it)}));
    algo::OnlineHooks::Batch b;
    b.true_success = run.true_success_rate();
    b.trajectories = std::move(run.trajectories);
    return b;
  };
  if (evaluate_test) {
    h.evaluate = [this, stream](const algo::Agent& a, int it) {
      return evaluate(a.policy, world_.tasks.test, cfg_.eval_rollouts,
                      core::hash_words({stream, 0xe7, static_cast<std::uint64_t>(it)}))
          .success;
    };
  }
  return h;
}

}  // namespace digirl::cli
