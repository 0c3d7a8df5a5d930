#pragma once

#include <vector>

#include "digirl/synthdevice/device_env.hpp"

namespace digirl::synthdevice {

/// Breadth-first search over deterministic dynamics (no pop-ups, no load
/// failures). Candidate actions are taps on every widget of the current
/// page, the three buttons, and typing the task's query.
struct Planner {
  const ScreenGraph& graph;
  const Layout& layout;
  SlotRanks ranks;

  /// Minimal action sequence from `start`; empty when the goal already
  /// holds. Throws InvariantError when the goal is unreachable.
  std::vector<core::Action> shortest_plan(const PageState& start, const core::Task& task) const;

  /// Length of the shortest plan, or -1 when unreachable within `cap` steps.
  int distance(const PageState& start, const core::Task& task, int cap = 32) const;
};

/// Plan for the episode the environment is currently in (call after reset).
/// Assumes p_popup = p_loadfail = 0 for the remainder of the episode.
std::vector<core::Action> oracle_shortest_path(const DeviceEnv& env, const core::Task& task);

/// Worst-case distance to the task's goal over every screen node, with and
/// without a pop-up covering it.
int max_recovery_distance(const ScreenGraph& graph, const core::Task& task);

/// Checks every task against the graph: goal reachable within
/// difficulty * 3 steps from home, and within horizon / 2 from any screen.
/// Throws InvariantError describing the first violation.
void validate_tasks(const ScreenGraph& graph, const std::vector<core::Task>& tasks, int horizon);

}  // namespace digirl::synthdevice
