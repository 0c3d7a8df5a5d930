#include "digirl/core/replay_buffer.hpp"

#include "digirl/core/error.hpp"

namespace digirl::core {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int horizon) : capacity_(capacity), horizon_(horizon) {
  if (capacity == 0) throw InvariantError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Trajectory t) { push(std::make_shared<const Trajectory>(std::move(t))); }

void ReplayBuffer::push(TrajectoryPtr t) {
  if (!t) throw InvariantError("null trajectory");
  if (auto why = validate(*t, horizon_); !why.empty()) {
    throw InvariantError("rejecting malformed trajectory: " + why);
  }
  items_.push_back(std::move(t));
  while (items_.size() > capacity_) items_.pop_front();
}

std::vector<TrajectoryPtr> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw InvariantError("cannot sample from an empty replay buffer");
  std::vector<TrajectoryPtr> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(items_[uniform_index(rng, items_.size())]);
  return out;
}

}  // namespace digirl::core
