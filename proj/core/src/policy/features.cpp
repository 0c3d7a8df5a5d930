#include "digirl/policy/features.hpp"

#include <algorithm>
#include <unordered_map>

#include "digirl/core/rng.hpp"
#include "digirl/core/vocab.hpp"

namespace digirl::policy {

using core::hash_words;
using core::ScreenKind;

namespace {

// Feature families. Each key is hash_words({family, ...}).
enum Tag : std::uint64_t {
  kBias = 1,
  kScreen,
  kScreenSite,
  kScreenInstr,
  kPrev,
  kPrevCur,
  kWidgetCell,
  kWidgetCellInstr,
  kCell,
  kOccupied,
  kCaptionCell,
  kRankCell,
  kRankCellSelect,
  kTyped,
  kQueryWord,
  kQueryLen,
  kStep,
  kScreenStep,
  kGoalMatch,
  kInstruction,
  kActKind,
  kActCell,
  kActButton,
  kActTyped,
};

std::uint64_t u(int v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); }
std::uint64_t kind(const core::ScreenView& v) { return static_cast<std::uint64_t>(v.screen.kind); }

int step_bucket(int h) { return h < 8 ? h : (h < 12 ? 8 : (h < 16 ? 9 : 10)); }

// empty / prefix of the query / exactly the query / anything else
int typed_status(const std::vector<core::TokenId>& typed, const std::vector<core::TokenId>& query) {
  if (typed.empty()) return 0;
  if (typed == query) return 2;
  if (typed.size() < query.size() && std::equal(typed.begin(), typed.end(), query.begin())) return 1;
  return 3;
}

}  // namespace

std::vector<std::uint64_t> featurize_raw(const core::Observation& o, const core::Task& task) {
  namespace v = core::vocab;
  const auto& cur = o.current;
  const auto& prev = o.previous;
  const auto& g = task.goal;
  const auto query = v::query_of(task.instruction);
  std::vector<core::TokenId> structural;
  for (auto t : task.instruction) {
    if (!v::is_word(t)) structural.push_back(t);
  }
  const std::uint64_t select = g.select_first ? 1 : 0;

  std::vector<std::uint64_t> keys;
  keys.reserve(64 + cur.widgets.size() * (2 + structural.size()));
  keys.push_back(hash_words({kBias}));
  keys.push_back(hash_words({kScreen, kind(cur)}));
  keys.push_back(hash_words({kScreenSite, kind(cur), u(cur.screen.site), u(cur.screen.index)}));
  for (auto t : task.instruction) keys.push_back(hash_words({kScreenInstr, kind(cur), u(t)}));
  keys.push_back(hash_words({kPrev, kind(prev)}));
  keys.push_back(hash_words({kPrevCur, kind(prev), kind(cur)}));

  // does the page agree with the goal so far
  const bool site_ok = cur.screen.site == g.site;
  const bool query_ok = g.query >= 0 && cur.screen.query == g.query;
  keys.push_back(hash_words({kGoalMatch, kind(cur), u(site_ok), u(query_ok), u(task.difficulty)}));

  for (const auto& w : cur.widgets) {
    keys.push_back(hash_words({kWidgetCell, u(w.widget), u(w.cell)}));
    keys.push_back(hash_words({kCell, kind(cur), u(w.cell)}));
    // layout-agnostic prior: something tappable lives here
    keys.push_back(hash_words({kOccupied, u(w.cell)}));
    // caption names something the instruction asks for
    if (w.caption != 0 && std::find(task.instruction.begin(), task.instruction.end(), w.caption) != task.instruction.end()) {
      keys.push_back(hash_words({kCaptionCell, u(w.cell)}));
    }
    for (auto t : structural) keys.push_back(hash_words({kWidgetCellInstr, u(w.widget), u(w.cell), u(t)}));
    if (w.label >= 0) {
      keys.push_back(hash_words({kRankCell, u(w.label), u(w.cell)}));
      keys.push_back(hash_words({kRankCellSelect, u(w.label), u(w.cell), select, u(query_ok)}));
    }
  }

  keys.push_back(hash_words({kTyped, kind(cur), u(typed_status(cur.typed, query))}));
  for (std::size_t i = 0; i < query.size(); ++i) {
    keys.push_back(hash_words({kQueryWord, i, u(query[i])}));
  }
  keys.push_back(hash_words({kQueryLen, query.size()}));
  keys.push_back(hash_words({kStep, u(step_bucket(o.step_index))}));
  keys.push_back(hash_words({kScreenStep, kind(cur), u(step_bucket(o.step_index))}));
  return keys;
}

FeatureVector hash_keys(const std::vector<std::uint64_t>& keys, std::uint32_t dim) {
  FeatureVector out;
  out.reserve(keys.size());
  for (auto k : keys) out.push_back(static_cast<std::uint32_t>(core::mix64(k) % dim));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

FeatureVector featurize(const core::Observation& o, const core::Task& task, std::uint32_t dim) {
  return hash_keys(featurize_raw(o, task), dim);
}

FeatureVector instruction_features(const core::Task& task, std::uint32_t dim) {
  std::uint64_t h = hash_words({kInstruction});
  for (auto t : task.instruction) h = hash_words({h, u(t)});
  return hash_keys({h}, dim);
}

FeatureVector action_features(const core::Action& a, const core::Observation& o, int grid, std::uint32_t dim) {
  std::vector<std::uint64_t> keys{hash_words({kActKind, kind(o.current), static_cast<std::uint64_t>(a.kind())})};
  switch (a.kind()) {
    case core::ActionKind::Tap: {
      // what was tapped matters more than where
      int widget = -1;
      for (const auto& w : o.current.widgets) {
        if (w.cell == a.cell(grid)) widget = w.widget;
      }
      keys.push_back(hash_words({kActCell, kind(o.current), u(widget)}));
      break;
    }
    case core::ActionKind::Press:
      keys.push_back(hash_words({kActButton, kind(o.current), static_cast<std::uint64_t>(a.as_press().button)}));
      break;
    case core::ActionKind::Type:
      keys.push_back(hash_words({kActTyped, a.as_type().tokens.size()}));
      break;
  }
  return hash_keys(keys, dim);
}

FeatureVector merge(const FeatureVector& a, const FeatureVector& b) {
  FeatureVector out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

CollisionStats collision_stats(const std::vector<std::uint64_t>& distinct_keys, std::uint32_t dim) {
  std::unordered_map<std::uint32_t, int> load;
  for (auto k : distinct_keys) ++load[static_cast<std::uint32_t>(core::mix64(k) % dim)];
  CollisionStats s;
  s.distinct_keys = distinct_keys.size();
  for (auto k : distinct_keys) {
    if (load[static_cast<std::uint32_t>(core::mix64(k) % dim)] > 1) ++s.colliding_keys;
  }
  return s;
}

}  // namespace digirl::policy
