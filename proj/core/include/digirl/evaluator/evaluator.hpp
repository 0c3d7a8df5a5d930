#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "digirl/core/rng.hpp"
#include "digirl/core/types.hpp"
#include "digirl/synthdevice/device_env.hpp"
#include "digirl/synthdevice/rollout.hpp"

namespace digirl::evaluator {

enum class EvalSource { Oracle, Noisy };

struct EvalResult {
  bool success = false;
  EvalSource source = EvalSource::Oracle;
};

/// Success iff the task's goal predicate holds in `state`. Reads internal
/// state on purpose.
EvalResult oracle_evaluate(const synthdevice::EnvState& state, const core::Task& task);

/// Oracle verdict flipped with probability epsilon, one draw per call.
/// Throws InvariantError unless epsilon lies in [0, 0.5).
EvalResult noisy_evaluate(const synthdevice::EnvState& state, const core::Task& task, double epsilon,
                          core::Rng& rng);

/// Replaces the terminal reward of t by a noisy judgement of its outcome.
/// The flip happens once per trajectory, the granularity at which the
/// evaluator is queried.
void relabel(core::Trajectory& t, double epsilon, core::Rng& rng);

enum class FailureMode { None = 0, FailToRecover, StuckMidway, WrongGoal, TechnicalIssue };
inline constexpr std::array<FailureMode, 5> kFailureModes{FailureMode::None, FailureMode::FailToRecover,
                                                          FailureMode::StuckMidway, FailureMode::WrongGoal,
                                                          FailureMode::TechnicalIssue};

std::string to_string(FailureMode m);
FailureMode failure_mode_from_string(const std::string& s);

/// Assigns exactly one mode to every trajectory. Checks in order:
///   None            goal reached (oracle truth from the trace)
///   TechnicalIssue  steps lost to load failures exceed the slack H - d0
///   WrongGoal       ended on a site page at least as deep as the goal but
///                   not the goal, or back on home after leaving it
///   FailToRecover   distance to goal rose above its best value so far and
///                   never came back down to it
///   StuckMidway     everything else (no-op loops, stalls)
FailureMode classify_failure(const core::Trajectory& t, const synthdevice::EnvTrace& trace,
                             const synthdevice::ScreenGraph& graph);

struct FailureHistogram {
  std::array<int, kFailureModes.size()> counts{};

  void add(FailureMode m) { ++counts[static_cast<std::size_t>(m)]; }
  int count(FailureMode m) const { return counts[static_cast<std::size_t>(m)]; }
  int failed() const;
  /// Fraction of failed trajectories; 0 when nothing failed. None is 0.
  double fraction(FailureMode m) const;
};

/// Columns: run_id,mode,count,fraction. Only failure modes are listed.
void write_failure_csv(std::ostream& os, const std::string& run_id, const FailureHistogram& h,
                       bool header = true);

}  // namespace digirl::evaluator
