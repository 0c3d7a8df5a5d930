#pragma once

#include <cstdint>

#include "digirl/core/rng.hpp"
#include "digirl/core/types.hpp"

namespace digirl::synthdevice {

struct EnvState;

struct StepOutcome {
  core::Observation observation;
  double reward = 0.0;
  bool done = false;
};

/// Episodic environment driven by rollout workers. One instance belongs to
/// exactly one execution context.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual core::Observation reset(const core::Task& task) = 0;
  /// Throws InvariantError when the episode already ended.
  virtual StepOutcome step(const core::Action& a, core::Rng& rng) = 0;
  virtual bool done() const = 0;
  virtual int horizon() const = 0;

  /// Drift clock: the next reset uses epoch floor(counter / period).
  virtual std::int64_t episode_counter() const = 0;
  virtual void set_episode_counter(std::int64_t n) = 0;
  virtual std::int64_t drift_epoch() const = 0;
  /// Extra entropy for per-episode randomness (result order) when many
  /// episodes share one clock value. Default: ignored.
  virtual void set_episode_salt(std::uint64_t) {}

  /// Internal state for environments that expose one (failure analysis,
  /// oracle evaluation); nullptr otherwise.
  virtual const EnvState* device_state() const { return nullptr; }
};

}  // namespace digirl::synthdevice
