#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <vector>

#include "digirl/core/rng.hpp"
#include "digirl/core/types.hpp"

namespace digirl::core {

using TrajectoryPtr = std::shared_ptr<const Trajectory>;

/// Bounded FIFO store of trajectories.
///
/// Single writer: exactly one component pushes. Readers take a snapshot()
/// between writes; a snapshot shares the immutable trajectories and stays
/// valid after later evictions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000, int horizon = 0);

  /// Appends t, evicting the oldest entry when full. Throws InvariantError
  /// for a malformed trajectory.
  void push(Trajectory t);
  void push(TrajectoryPtr t);

  /// n draws uniformly with replacement. Throws on an empty buffer.
  std::vector<TrajectoryPtr> sample(std::size_t n, Rng& rng) const;

  /// Oldest first.
  std::vector<TrajectoryPtr> snapshot() const { return {items_.begin(), items_.end()}; }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }
  int horizon() const { return horizon_; }
  const Trajectory& operator[](std::size_t i) const { return *items_[i]; }

 private:
  std::size_t capacity_;
  int horizon_;
  std::deque<TrajectoryPtr> items_;
};

}  // namespace digirl::core
