#include "digirl/synthdevice/rollout.hpp"

namespace digirl::synthdevice {

core::Trajectory run_episode(Environment& env, const core::Task& task, const ActFn& act, core::Rng& rng,
                             std::int64_t policy_version, EnvTrace* trace) {
  core::Trajectory t;
  t.task = task;
  t.policy_version = policy_version;
  t.wallclock_epoch = env.drift_epoch();
  auto obs = env.reset(task);
  t.steps.reserve(static_cast<std::size_t>(env.horizon()));
  const EnvState* st = trace ? env.device_state() : nullptr;
  if (st) {
    trace->pages = {st->page};
    trace->ranks = st->slot_rank;
    trace->horizon = env.horizon();
  }
  while (!env.done()) {
    core::Step s;
    s.observation = std::move(obs);
    s.action = act(s.observation, task, rng);
    auto out = env.step(s.action, rng);
    s.reward = out.reward;
    s.done = out.done;
    obs = std::move(out.observation);
    t.steps.push_back(std::move(s));
    if (st) trace->pages.push_back(st->page);
  }
  if (st) trace->load_failures = st->load_failures;
  t.final_reward = t.steps.back().reward;
  return t;
}

}  // namespace digirl::synthdevice
