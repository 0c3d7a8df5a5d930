#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "digirl/synthdevice/device_env.hpp"

namespace digirl::synthdevice {

using ActFn = std::function<core::Action(const core::Observation&, const core::Task&, core::Rng&)>;

/// Internal states visited during one episode; pages[0] is the page after
/// reset, pages[h + 1] the page after step h.
struct EnvTrace {
  std::vector<PageState> pages;
  SlotRanks ranks{};
  int load_failures = 0;
  int horizon = 0;
};

/// Runs one episode to termination. The trace is filled only for
/// environments that expose their device state.
core::Trajectory run_episode(Environment& env, const core::Task& task, const ActFn& act, core::Rng& rng,
                             std::int64_t policy_version = 0, EnvTrace* trace = nullptr);

}  // namespace digirl::synthdevice
