#pragma once

#include <memory>

#include "digirl/synthdevice/device_env.hpp"
#include "digirl/synthdevice/planner.hpp"
#include "digirl/synthdevice/rollout.hpp"
#include "digirl/synthdevice/tasks.hpp"

namespace fx {

using namespace digirl;

struct SmallWorld {
  std::shared_ptr<const synthdevice::ScreenGraph> graph;
  synthdevice::TaskSet tasks;
  synthdevice::EnvConfig env;

  explicit SmallWorld(std::uint64_t seed = 3, int n_train = 60, int n_test = 24) {
    graph = std::make_shared<const synthdevice::ScreenGraph>(synthdevice::ScreenGraph::generate(seed));
    tasks = synthdevice::generate_tasks(seed, n_train, n_test);
    env.seed = seed;
  }

  synthdevice::DeviceEnv make_env(bool deterministic = true) const {
    return synthdevice::DeviceEnv(graph, deterministic ? env.deterministic() : env);
  }
};

/// Acts out a fixed list of actions; BACK once the list runs out.
inline synthdevice::ActFn scripted(std::vector<core::Action> actions) {
  auto i = std::make_shared<std::size_t>(0);
  return [actions = std::move(actions), i](const core::Observation&, const core::Task&, core::Rng&) {
    if (*i < actions.size()) return actions[(*i)++];
    return core::Action::press(core::Button::Back);
  };
}

/// Follows the shortest plan recomputed at every step (handles pop-ups).
inline synthdevice::ActFn oracle(const synthdevice::DeviceEnv& env) {
  return [&env](const core::Observation&, const core::Task& task, core::Rng&) {
    const auto& st = env.state();
    if (st.page.overlay) return core::Action::press(core::Button::Back);
    synthdevice::Planner pl{env.graph(), env.layout(), st.slot_rank};
    auto plan = pl.shortest_plan(st.page, task);
    return plan.empty() ? core::Action::press(core::Button::Back) : plan.front();
  };
}

inline core::Trajectory oracle_episode(synthdevice::DeviceEnv& env, const core::Task& task, std::uint64_t seed = 1,
                                       synthdevice::EnvTrace* trace = nullptr) {
  core::Rng rng(seed);
  return synthdevice::run_episode(env, task, oracle(env), rng, 0, trace);
}

}  // namespace fx
