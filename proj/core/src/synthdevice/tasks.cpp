#include "digirl/synthdevice/tasks.hpp"

#include <algorithm>
#include <set>

#include "digirl/core/error.hpp"
#include "digirl/core/rng.hpp"
#include "digirl/core/vocab.hpp"

namespace digirl::synthdevice {

using core::Task;
using core::TokenId;

const QueryCatalog& QueryCatalog::standard() {
  static const QueryCatalog catalog = generate(0x5eed'ca7a'109ULL, 40, 16);
  return catalog;
}

QueryCatalog QueryCatalog::generate(std::uint64_t seed, int n_queries, int vocab) {
  if (vocab < 3) throw InvariantError("query vocabulary too small");
  auto rng = core::derive_rng(seed, {0x9e11});
  std::set<std::vector<TokenId>> seen;
  QueryCatalog out;
  std::uniform_int_distribution<int> word(1, vocab - 1);
  std::uniform_int_distribution<int> len(2, 3);
  int guard = 0;
  while (out.size() < n_queries) {
    if (++guard > 100000) throw InvariantError("cannot draw enough distinct queries");
    std::vector<TokenId> q(static_cast<std::size_t>(len(rng)));
    for (auto& t : q) t = word(rng);
    if (seen.insert(q).second) out.queries.push_back(std::move(q));
  }
  return out;
}

int QueryCatalog::lookup(const std::vector<TokenId>& typed) const {
  for (int i = 0; i < size(); ++i) {
    if (queries[static_cast<std::size_t>(i)] == typed) return i;
  }
  return -1;
}

std::vector<Task> TaskSet::all() const {
  auto out = train;
  out.insert(out.end(), test.begin(), test.end());
  return out;
}

std::vector<TokenId> make_instruction(const core::GoalSpec& goal, const QueryCatalog& catalog) {
  namespace v = core::vocab;
  std::vector<TokenId> ins{v::kGoTo, v::site_token(goal.site)};
  if (goal.query >= 0) {
    ins.push_back(v::kSearchFor);
    for (auto t : catalog.queries.at(static_cast<std::size_t>(goal.query))) ins.push_back(v::word_token(t));
  }
  if (goal.select_first) ins.push_back(v::kSelectFirst);
  return ins;
}

namespace {

std::vector<Task> make_split(int n, int first_id, core::Split split,
                             const std::vector<std::pair<int, int>>& pairs, const QueryCatalog& catalog,
                             core::Rng& rng) {
  std::vector<Task> out;
  out.reserve(static_cast<std::size_t>(n));
  auto pool = pairs;
  std::shuffle(pool.begin(), pool.end(), rng);
  std::size_t cursor = 0;
  int site_cursor = static_cast<int>(rng() % kNumSites);
  for (int i = 0; i < n; ++i) {
    Task t;
    t.id = first_id + i;
    t.split = split;
    t.difficulty = 1 + i % 3;
    if (t.difficulty == 1) {
      t.goal.site = site_cursor;
      site_cursor = (site_cursor + 1) % kNumSites;
    } else {
      const auto [site, query] = pool[cursor % pool.size()];
      ++cursor;
      t.goal.site = site;
      t.goal.query = query;
      t.goal.select_first = t.difficulty == 3;
    }
    t.instruction = make_instruction(t.goal, catalog);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

TaskSet generate_tasks(std::uint64_t seed, int n_train, int n_test, const QueryCatalog& catalog) {
  if (n_train < 1 || n_test < 1) throw InvariantError("task counts must be at least 1");
  auto rng = core::derive_rng(seed, {0x7a5c});
  std::vector<std::pair<int, int>> pairs;
  for (int s = 0; s < kNumSites; ++s) {
    for (int q = 0; q < catalog.size(); ++q) pairs.emplace_back(s, q);
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const auto n_test_pairs = std::max<std::size_t>(1, pairs.size() / 5);
  std::vector<std::pair<int, int>> test_pairs(pairs.begin(), pairs.begin() + static_cast<long>(n_test_pairs));
  std::vector<std::pair<int, int>> train_pairs(pairs.begin() + static_cast<long>(n_test_pairs), pairs.end());

  TaskSet out;
  out.train = make_split(n_train, 0, core::Split::Train, train_pairs, catalog, rng);
  out.test = make_split(n_test, n_train, core::Split::Test, test_pairs, catalog, rng);
  return out;
}

}  // namespace digirl::synthdevice
