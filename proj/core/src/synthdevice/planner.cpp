#include "digirl/synthdevice/planner.hpp"

#include <deque>
#include <map>
#include <numeric>

#include "digirl/core/error.hpp"
#include "digirl/core/vocab.hpp"

namespace digirl::synthdevice {

using core::Action;
using core::Button;

namespace {

std::vector<Action> candidates(const ScreenGraph& graph, const Layout& layout, const PageState& page,
                               const std::vector<core::TokenId>& query) {
  std::vector<Action> out{Action::press(Button::Back), Action::press(Button::Home),
                          Action::press(Button::Enter)};
  if (page.overlay) {
    out.push_back(Action::tap_cell(page.dismiss_cell, layout.grid));
    out.push_back(Action::tap_cell(page.ad_cell, layout.grid));
    return out;
  }
  const int unit = graph.unit_of(page.screen);
  if (unit >= 0) {
    const auto n = graph.units()[static_cast<std::size_t>(unit)].widgets.size();
    for (std::size_t k = 0; k < n; ++k) out.push_back(Action::tap_cell(layout.cell_of(unit, static_cast<int>(k)), layout.grid));
  }
  if (!query.empty() && page.screen.kind == core::ScreenKind::Search) out.push_back(Action::type(query));
  return out;
}

// Everything in PageState matters, but a compact string key keeps the map simple.
std::string key_of(const PageState& p) {
  std::string k = std::to_string(p.screen.key()) + (p.overlay ? "o" : "-") + std::to_string(p.dismiss_cell) + "," +
                  std::to_string(p.ad_cell) + ":";
  for (auto t : p.typed) k += std::to_string(t) + ".";
  return k;
}

// Returns the parent map of a BFS that stopped at the first goal state.
struct Search {
  bool found = false;
  PageState goal;
  std::map<std::string, std::pair<std::string, Action>> parent;
  std::map<std::string, int> depth;
};

Search bfs(const Planner& p, const PageState& start, const core::Task& task, int cap) {
  Search s;
  const auto query = core::vocab::query_of(task.instruction);
  const auto k0 = key_of(start);
  s.depth[k0] = 0;
  if (goal_holds(start, task.goal)) {
    s.found = true;
    s.goal = start;
    return s;
  }
  std::deque<PageState> frontier{start};
  while (!frontier.empty()) {
    auto cur = std::move(frontier.front());
    frontier.pop_front();
    const auto kc = key_of(cur);
    const int d = s.depth[kc];
    if (d >= cap) continue;
    for (const auto& a : candidates(p.graph, p.layout, cur, query)) {
      auto next = apply_action(p.graph, p.layout, p.ranks, cur, a);
      auto kn = key_of(next);
      if (s.depth.count(kn)) continue;
      s.depth[kn] = d + 1;
      s.parent[kn] = {kc, a};
      if (goal_holds(next, task.goal)) {
        s.found = true;
        s.goal = std::move(next);
        return s;
      }
      frontier.push_back(std::move(next));
    }
  }
  return s;
}

}  // namespace

std::vector<Action> Planner::shortest_plan(const PageState& start, const core::Task& task) const {
  auto s = bfs(*this, start, task, 64);
  if (!s.found) throw InvariantError("goal unreachable for task " + std::to_string(task.id));
  std::vector<Action> plan;
  const auto k0 = key_of(start);
  for (auto k = key_of(s.goal); k != k0;) {
    const auto& [prev, a] = s.parent.at(k);
    plan.push_back(a);
    k = prev;
  }
  return {plan.rbegin(), plan.rend()};
}

int Planner::distance(const PageState& start, const core::Task& task, int cap) const {
  auto s = bfs(*this, start, task, cap);
  return s.found ? s.depth.at(key_of(s.goal)) : -1;
}

std::vector<Action> oracle_shortest_path(const DeviceEnv& env, const core::Task& task) {
  const auto& st = env.state();
  Planner p{env.graph(), env.layout(), st.slot_rank};
  return p.shortest_plan(st.page, task);
}

int max_recovery_distance(const ScreenGraph& graph, const core::Task& task) {
  SlotRanks ranks;
  std::iota(ranks.begin(), ranks.end(), 0);
  Planner p{graph, graph.base_layout(), ranks};
  int worst = 0;
  for (const auto& s : graph.screens()) {
    PageState page;
    page.screen = s;
    for (bool overlay : {false, true}) {
      page.overlay = overlay;
      page.dismiss_cell = overlay ? 0 : -1;
      page.ad_cell = overlay ? 1 : -1;
      const int d = p.distance(page, task);
      if (d < 0) throw InvariantError("goal of task " + std::to_string(task.id) + " unreachable from " + core::to_string(s));
      worst = std::max(worst, d);
    }
  }
  return worst;
}

void validate_tasks(const ScreenGraph& graph, const std::vector<core::Task>& tasks, int horizon) {
  SlotRanks ranks;
  std::iota(ranks.begin(), ranks.end(), 0);
  Planner p{graph, graph.base_layout(), ranks};
  // Recovery distance depends on the goal's shape only, so one task per
  // difficulty suffices for the horizon check.
  std::map<int, int> recovery;
  for (const auto& t : tasks) {
    if (!core::is_valid(t)) throw InvariantError("malformed task " + std::to_string(t.id));
    const int d = p.distance(PageState{}, t);
    if (d < 0 || d > 3 * t.difficulty) {
      throw InvariantError("task " + std::to_string(t.id) + " goal depth " + std::to_string(d) + " exceeds " +
                           std::to_string(3 * t.difficulty));
    }
    if (!recovery.count(t.difficulty)) recovery[t.difficulty] = max_recovery_distance(graph, t);
    if (2 * recovery[t.difficulty] > horizon) {
      throw InvariantError("task " + std::to_string(t.id) + " needs " + std::to_string(recovery[t.difficulty]) +
                           " recovery steps, more than horizon / 2");
    }
  }
}

}  // namespace digirl::synthdevice
