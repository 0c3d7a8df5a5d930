#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "digirl/algo/advantage.hpp"
#include "digirl/core/replay_buffer.hpp"
#include "digirl/core/run_config.hpp"
#include "digirl/policy/policy.hpp"
#include "digirl/values/value_head.hpp"

namespace digirl::algo {

/// Actor plus both value heads.
struct Agent {
  policy::PolicySnapshot policy;
  values::ValueHead v_step{values::ValueKind::Step};
  values::ValueHead v_instruct{values::ValueKind::Instruct};

  static Agent fresh(const core::ActionSpace& space = {}, std::uint32_t dim = policy::kDefaultDim);
};

/// Features of buffered trajectories, computed once per trajectory.
class FeatureCache {
 public:
  struct Entry {
    std::weak_ptr<const core::Trajectory> owner;
    std::vector<policy::FeatureVector> state;  ///< policy features per step
    std::vector<policy::FeatureVector> value;  ///< step-value features per step
    policy::FeatureVector instruction;
  };

  FeatureCache(std::uint32_t dim, bool value_uses_action, int grid)
      : dim_(dim), value_uses_action_(value_uses_action), grid_(grid) {}

  const Entry& get(const core::TrajectoryPtr& t);
  /// Drops entries whose trajectory is no longer referenced.
  void prune();
  std::size_t size() const { return entries_.size(); }

 private:
  std::uint32_t dim_;
  bool value_uses_action_;
  int grid_;
  std::map<const core::Trajectory*, Entry> entries_;
};

enum class Mode { Offline, Online };

struct IterationMetrics {
  std::size_t buffer_size = 0;
  std::size_t selected_trajectories = 0;  ///< after the trajectory-level filter
  std::size_t candidate_steps = 0;        ///< steps in the buffer
  std::size_t kept_steps = 0;             ///< steps reaching the actor
  double filtered_fraction = 0.0;         ///< kept / candidate
  double mean_a_instruct = 0.0;
  double instruct_loss = 0.0;
  double step_loss = 0.0;
  double actor_loss = 0.0;
  int actor_updates = 0;
  bool actor_skipped = false;
};

struct TrainOptions {
  int instruct_updates = 0;
  int value_updates = 0;
  int actor_updates = 0;
  Mode mode = Mode::Online;
};

/// Generic iteration: value heads on the unfiltered buffer, then the
/// variant's filters, then the actor. The agent is updated in place.
IterationMetrics train_step(const AlgoVariant& variant, const std::vector<core::TrajectoryPtr>& buffer, Agent& agent,
                            const core::RunConfig& cfg, core::Rng& rng, const TrainOptions& opt, FeatureCache& cache);

/// One online iteration with the configured update counts.
IterationMetrics train_iteration(const AlgoVariant& variant, const core::ReplayBuffer& buffer, Agent& agent,
                                 const core::RunConfig& cfg, core::Rng& rng, FeatureCache& cache,
                                 Mode mode = Mode::Online);

/// Steps that survive the variant's filters, with their loss weights.
struct ActorSet {
  std::vector<policy::Example> examples;
  std::size_t selected_trajectories = 0;
  std::size_t candidate_steps = 0;
  double mean_a_instruct = 0.0;
};

ActorSet select_actor_data(const AlgoVariant& variant, const std::vector<core::TrajectoryPtr>& buffer,
                           const Agent& agent, const core::RunConfig& cfg, Mode mode, FeatureCache& cache);

/// Offline phase: value heads first (their offline iteration counts), then
/// the actor on success-filtered data. Starts from `agent`.
Agent run_offline(const AlgoVariant& variant, const std::vector<core::Trajectory>& data, const core::RunConfig& cfg,
                  Agent agent, core::Rng& rng, IterationMetrics* last = nullptr);

struct CurveRow {
  int iteration = 0;
  std::int64_t n_traj = 0;
  double train_success = 0.0;
  std::optional<double> test_success;
  double mean_a_instruct = 0.0;
  double filtered_fraction = 0.0;
};

void write_curve_header(std::ostream& os);
void write_curve_row(std::ostream& os, const CurveRow& r);
std::vector<CurveRow> read_curve(std::istream& is);

/// What the online loop needs from the outside world.
struct OnlineHooks {
  struct Batch {
    std::vector<core::Trajectory> trajectories;
    double true_success = 0.0;  ///< oracle success rate of the batch
  };
  /// Collects n rollouts with the given snapshot at iteration `it`.
  std::function<Batch(const policy::PolicySnapshot&, int n, int it)> collect;
  /// Test success of the agent; called every cfg.eval_every iterations and
  /// after the last one. Optional.
  std::function<double(const Agent&, int it)> evaluate;
  /// Called after every iteration (checkpointing). Optional.
  std::function<void(int it)> after_iteration;
  bool train = true;  ///< false: collect only (frozen control)
};

/// State of an online run, complete enough to resume bit-identically.
struct OnlineState {
  Agent agent;
  core::ReplayBuffer buffer;
  core::Rng rng;
  int iteration = 0;  ///< iterations completed
  std::int64_t n_traj = 0;
  std::vector<CurveRow> curve;
};

/// Runs iterations state.iteration + 1 .. n_iterations.
void run_online(const AlgoVariant& variant, OnlineState& state, const OnlineHooks& hooks,
                const core::RunConfig& cfg, int n_iterations);

}  // namespace digirl::algo
