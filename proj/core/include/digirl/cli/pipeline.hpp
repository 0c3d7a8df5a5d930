#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "digirl/algo/trainer.hpp"
#include "digirl/evaluator/evaluator.hpp"
#include "digirl/farm/farm.hpp"
#include "digirl/synthdevice/device_env.hpp"
#include "digirl/synthdevice/tasks.hpp"

namespace digirl::cli {

/// One generated device world and its task split.
struct World {
  std::shared_ptr<const synthdevice::ScreenGraph> graph;
  synthdevice::TaskSet tasks;
  synthdevice::EnvConfig env;

  static World make(std::uint64_t seed, const synthdevice::EnvConfig& env, int n_train, int n_test);
  farm::EnvFactory factory() const;
  farm::EnvFactory deterministic_factory() const;
};

struct FarmSetup {
  int workers = 4;
  double latency_ms = 3000.0;
  farm::FaultProfile faults;
};

struct EvalSummary {
  double success = 0.0;
  int rollouts = 0;
  std::array<double, 3> by_difficulty{};  ///< success per difficulty 1..3
  evaluator::FailureHistogram failures;
  std::vector<core::Trajectory> trajectories;
};

/// Runs experiments against one world. Owns the drift clock: training
/// rollouts advance it, evaluations run at its current value and do not.
class Harness {
 public:
  Harness(World world, core::RunConfig cfg, FarmSetup farm, std::uint64_t seed);

  const World& world() const { return world_; }
  const core::RunConfig& config() const { return cfg_; }
  std::int64_t clock() const { return clock_; }
  void set_clock(std::int64_t c) { clock_ = c; }
  std::int64_t epoch() const;

  /// n training rollouts on tasks drawn uniformly from the train split;
  /// advances the clock by n. Rewards pass through the noisy evaluator
  /// when cfg.reward_noise > 0.
  farm::FarmRun collect(const policy::PolicySnapshot& p, int n, std::uint64_t stream);

  /// Success on `tasks` (cycled) at the current clock, n rollouts.
  EvalSummary evaluate(const policy::PolicySnapshot& p, const std::vector<core::Task>& tasks, int n,
                       std::uint64_t stream, bool classify = false) const {
    return evaluate_at(clock_, p, tasks, n, stream, classify);
  }
  EvalSummary evaluate_at(std::int64_t clock, const policy::PolicySnapshot& p, const std::vector<core::Task>& tasks,
                          int n, std::uint64_t stream, bool classify = false) const;

  /// Shortest-path demonstrations: `per_task` episodes for every train
  /// task in the deterministic world at epoch 0.
  std::vector<core::Trajectory> oracle_demos(int per_task) const;

  /// Behaviour cloning on oracle demonstrations.
  algo::Agent bc_on_demos(int per_task) const;

  /// Online hooks collecting with this harness.
  algo::OnlineHooks hooks(std::uint64_t stream, bool evaluate_test);

 private:
  World world_;
  core::RunConfig cfg_;
  FarmSetup farm_;
  std::uint64_t seed_;
  std::int64_t clock_ = 0;
};

}  // namespace digirl::cli
