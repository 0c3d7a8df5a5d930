#pragma once

#include <cstdint>
#include <vector>

#include "digirl/core/types.hpp"

namespace digirl::synthdevice {

inline constexpr int kNumSites = 5;
inline constexpr int kNumApps = 3;
inline constexpr int kResultSlots = 5;

/// Search queries known to every site. Query ids index `queries`.
struct QueryCatalog {
  std::vector<std::vector<core::TokenId>> queries;

  /// Fixed 40-query catalog over typing tokens 1..15.
  static const QueryCatalog& standard();
  static QueryCatalog generate(std::uint64_t seed, int n_queries, int vocab);

  /// Query id whose tokens equal `typed`, or -1.
  int lookup(const std::vector<core::TokenId>& typed) const;
  int size() const { return static_cast<int>(queries.size()); }
};

struct TaskSet {
  std::vector<core::Task> train;
  std::vector<core::Task> test;

  std::vector<core::Task> all() const;
};

std::vector<core::TokenId> make_instruction(const core::GoalSpec& goal, const QueryCatalog& catalog);

/// Tasks cover difficulties {1,2,3} and all sites evenly. Train and test use
/// disjoint (site, query) pairs; difficulty-1 tasks carry no query and
/// therefore only differ by site.
TaskSet generate_tasks(std::uint64_t seed, int n_train, int n_test,
                       const QueryCatalog& catalog = QueryCatalog::standard());

}  // namespace digirl::synthdevice
