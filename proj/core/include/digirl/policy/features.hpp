#pragma once

#include <cstdint>
#include <vector>

#include "digirl/core/types.hpp"

namespace digirl::policy {

inline constexpr std::uint32_t kDefaultDim = 1u << 16;

/// Sorted, duplicate-free indices of the active (value 1) features.
using FeatureVector = std::vector<std::uint32_t>;

/// 64-bit feature keys before hashing into D buckets. Distinct keys are
/// distinct features; two keys landing in one bucket is a collision.
std::vector<std::uint64_t> featurize_raw(const core::Observation& o, const core::Task& task);

/// Frozen encoder: hashed conjunctions of screen identity, widget
/// placement, displayed ranks, typed text and the instruction.
FeatureVector featurize(const core::Observation& o, const core::Task& task, std::uint32_t dim = kDefaultDim);

/// Instruction identity only (one active feature per distinct instruction).
FeatureVector instruction_features(const core::Task& task, std::uint32_t dim = kDefaultDim);

/// Extra features describing an action, for action-conditioned values.
FeatureVector action_features(const core::Action& a, const core::Observation& o, int grid,
                              std::uint32_t dim = kDefaultDim);

FeatureVector hash_keys(const std::vector<std::uint64_t>& keys, std::uint32_t dim);

/// Union of two feature vectors.
FeatureVector merge(const FeatureVector& a, const FeatureVector& b);

struct CollisionStats {
  std::size_t distinct_keys = 0;
  std::size_t colliding_keys = 0;  ///< keys sharing a bucket with another key
  double rate() const { return distinct_keys ? static_cast<double>(colliding_keys) / distinct_keys : 0.0; }
};

CollisionStats collision_stats(const std::vector<std::uint64_t>& distinct_keys, std::uint32_t dim);

}  // namespace digirl::policy
