#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "digirl/policy/policy.hpp"
#include "digirl/synthdevice/environment.hpp"
#include "digirl/synthdevice/rollout.hpp"

namespace digirl::farm {

struct FaultProfile {
  double p_recoverable = 0.0;  ///< per step; restart the episode, same task
  double p_fatal = 0.0;        ///< per step; discard the episode, restart the worker
};

struct WorkerSpec {
  int id = 0;
  std::uint64_t seed = 0;    ///< fault stream and environment instance
  double latency_ms = 0.0;   ///< virtual time per environment step
  FaultProfile faults;

  void validate() const;
};

/// Builds a fresh environment for a worker (called again after each fatal
/// restart).
using EnvFactory = std::function<std::unique_ptr<synthdevice::Environment>(const WorkerSpec&)>;

struct FarmConfig {
  std::uint64_t seed = 0;          ///< episode streams derive from (seed, slot, attempt)
  double temperature = 1.0;
  int restart_budget = 10;         ///< fatal restarts a worker survives
  double aggregation_ms = 0.0;     ///< host cost per aggregated trajectory
  std::int64_t episode_base = 0;   ///< drift clock of slot 0; slot k runs at base + k
  bool pin_clock = false;          ///< every slot runs at episode_base (evaluation)
  double reward_noise = 0.0;       ///< evaluator flip probability
  bool record_traces = false;
  bool threaded = true;            ///< one thread per worker; false runs them in turn
};

struct FarmRun {
  std::int64_t policy_version = 0;
  int workers = 0;
  int n_total = 0;
  std::vector<core::Trajectory> trajectories;  ///< ordered by slot
  std::vector<bool> true_success;              ///< oracle outcome per trajectory
  std::vector<synthdevice::EnvTrace> traces;   ///< when record_traces
  std::vector<double> worker_ms;               ///< virtual clock of each worker
  double virtual_ms = 0.0;                     ///< barrier: max over workers + aggregation
  int recoverable_resets = 0;
  int fatal_restarts = 0;
  int discarded = 0;
  bool aborted = false;  ///< every worker exhausted its restart budget

  double virtual_minutes() const { return virtual_ms / 60000.0; }
  double traj_per_min() const;
  double true_success_rate() const;
  std::string to_json() const;
};

/// Synchronous collection of n_total episodes. Slot k runs task k mod
/// |tasks| on worker k mod W; slots of a worker that exhausts its restart
/// budget move round-robin to the survivors. Every trajectory is a pure
/// function of (policy, task, slot, attempt), so results do not depend on
/// thread timing.
FarmRun collect(const synthdevice::ActFn& act, std::int64_t policy_version, const std::vector<core::Task>& tasks,
                const std::vector<WorkerSpec>& workers, int n_total, const EnvFactory& make_env,
                const FarmConfig& cfg = {});

FarmRun collect(const policy::PolicySnapshot& policy, const std::vector<core::Task>& tasks,
                const std::vector<WorkerSpec>& workers, int n_total, const EnvFactory& make_env,
                const FarmConfig& cfg = {});

/// W identical workers with ids 0..W-1 and seeds derived from `seed`.
std::vector<WorkerSpec> make_workers(int n, std::uint64_t seed, double latency_ms = 0.0, FaultProfile faults = {});

/// Environment whose episodes always last exactly `horizon` steps.
class FixedLengthEnv final : public synthdevice::Environment {
 public:
  explicit FixedLengthEnv(int horizon) : horizon_(horizon) {}
  core::Observation reset(const core::Task& task) override;
  synthdevice::StepOutcome step(const core::Action& a, core::Rng& rng) override;
  bool done() const override { return steps_ >= horizon_; }
  int horizon() const override { return horizon_; }
  std::int64_t episode_counter() const override { return counter_; }
  void set_episode_counter(std::int64_t n) override { counter_ = n; }
  std::int64_t drift_epoch() const override { return 0; }

 private:
  int horizon_;
  int steps_ = 0;
  std::int64_t counter_ = 0;
};

/// Trajectories per virtual minute for `workers` fault-free workers on
/// fixed-length episodes.
double throughput(int workers, double per_step_latency_ms, int horizon, int n_total);

}  // namespace digirl::farm
