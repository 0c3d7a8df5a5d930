#include "digirl/evaluator/evaluator.hpp"

#include <algorithm>
#include <ostream>

#include "digirl/core/error.hpp"
#include "digirl/synthdevice/planner.hpp"

namespace digirl::evaluator {

using core::ScreenKind;
using synthdevice::PageState;

EvalResult oracle_evaluate(const synthdevice::EnvState& state, const core::Task& task) {
  return {synthdevice::goal_holds(state.page, task.goal), EvalSource::Oracle};
}

EvalResult noisy_evaluate(const synthdevice::EnvState& state, const core::Task& task, double epsilon,
                          core::Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw InvariantError("evaluator noise must lie in [0, 0.5)");
  auto r = oracle_evaluate(state, task);
  if (core::bernoulli(rng, epsilon)) r.success = !r.success;
  r.source = EvalSource::Noisy;
  return r;
}

void relabel(core::Trajectory& t, double epsilon, core::Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw InvariantError("evaluator noise must lie in [0, 0.5)");
  if (t.steps.empty() || !core::bernoulli(rng, epsilon)) return;
  t.final_reward = t.succeeded() ? 0.0 : 1.0;
  t.steps.back().reward = t.final_reward;
}

std::string to_string(FailureMode m) {
  switch (m) {
    case FailureMode::None: return "none";
    case FailureMode::FailToRecover: return "fail_to_recover";
    case FailureMode::StuckMidway: return "stuck_midway";
    case FailureMode::WrongGoal: return "wrong_goal";
    case FailureMode::TechnicalIssue: return "technical_issue";
  }
  return "?";
}

FailureMode failure_mode_from_string(const std::string& s) {
  for (auto m : kFailureModes) {
    if (to_string(m) == s) return m;
  }
  throw InvariantError("unknown failure mode '" + s + "'");
}

namespace {

int depth_of(ScreenKind k) {
  switch (k) {
    case ScreenKind::Landing: return 1;
    case ScreenKind::Search: return 2;
    case ScreenKind::Results: return 3;
    case ScreenKind::Detail: return 4;
    default: return 0;
  }
}

int goal_depth(const core::GoalSpec& g) {
  if (g.select_first) return depth_of(ScreenKind::Detail);
  if (g.query >= 0) return depth_of(ScreenKind::Results);
  return depth_of(ScreenKind::Landing);
}

}  // namespace

FailureMode classify_failure(const core::Trajectory& t, const synthdevice::EnvTrace& trace,
                             const synthdevice::ScreenGraph& graph) {
  if (trace.pages.empty()) throw InvariantError("classify_failure needs an environment trace");
  const auto& goal = t.task.goal;
  if (synthdevice::goal_holds(trace.pages.back(), goal)) return FailureMode::None;

  synthdevice::SlotRanks ranks = trace.ranks;
  synthdevice::Planner planner{graph, graph.base_layout(), ranks};
  std::vector<int> dist;
  dist.reserve(trace.pages.size());
  for (const auto& p : trace.pages) dist.push_back(planner.distance(p, t.task));
  if (std::find(dist.begin(), dist.end(), -1) != dist.end()) throw InvariantError("trace visited a dead end");

  const int horizon = trace.horizon > 0 ? trace.horizon : static_cast<int>(t.size());
  if (trace.load_failures > horizon - dist.front()) return FailureMode::TechnicalIssue;

  const PageState* last = nullptr;
  for (auto it = trace.pages.rbegin(); it != trace.pages.rend(); ++it) {
    if (!it->overlay) {
      last = &*it;
      break;
    }
  }
  if (last) {
    const auto& s = last->screen;
    if (depth_of(s.kind) >= goal_depth(goal)) return FailureMode::WrongGoal;
    const bool left_home = std::any_of(trace.pages.begin(), trace.pages.end(),
                                       [](const PageState& p) { return p.screen.kind != ScreenKind::Home; });
    if (s.kind == ScreenKind::Home && left_home) return FailureMode::WrongGoal;
  }

  // suffix minima answer "did it ever get back" in one pass
  std::vector<int> suffix_min(dist.size());
  int m = dist.back();
  for (std::size_t i = dist.size(); i-- > 0;) suffix_min[i] = m = std::min(m, dist[i]);
  int best = dist.front();
  for (std::size_t h = 1; h < dist.size(); ++h) {
    if (dist[h] > best && suffix_min[h] > best) return FailureMode::FailToRecover;
    best = std::min(best, dist[h]);
  }
  return FailureMode::StuckMidway;
}

int FailureHistogram::failed() const {
  int n = 0;
  for (auto m : kFailureModes) {
    if (m != FailureMode::None) n += count(m);
  }
  return n;
}

double FailureHistogram::fraction(FailureMode m) const {
  const int f = failed();
  if (m == FailureMode::None || f == 0) return 0.0;
  return static_cast<double>(count(m)) / f;
}

void write_failure_csv(std::ostream& os, const std::string& run_id, const FailureHistogram& h, bool header) {
  if (header) os << "run_id,mode,count,fraction\n";
  for (auto m : kFailureModes) {
    if (m == FailureMode::None) continue;
    os << run_id << ',' << to_string(m) << ',' << h.count(m) << ',' << h.fraction(m) << '\n';
  }
}

}  // namespace digirl::evaluator
