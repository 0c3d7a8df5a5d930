#include <cmath>
#include <set>

#include "digirl/core/error.hpp"
#include "digirl/core/vocab.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace digirl;
using namespace digirl::synthdevice;
using core::Action;
using core::Button;
using core::ScreenKind;

TEST_CASE("generated graph passes its structural checks") {
  for (std::uint64_t seed : {1, 2, 3, 11}) {
    auto g = ScreenGraph::generate(seed);
    CHECK_NOTHROW(g.validate());
    CHECK(g.drift_widgets() > 0);
    CHECK(g.drift_widgets() < g.total_widgets());
    int site_widgets = 0;
    for (const auto& u : g.units()) {
      if (u.site >= 0) site_widgets += static_cast<int>(u.widgets.size());
    }
    CHECK(g.drift_widgets() == site_widgets);
  }
}

TEST_CASE("task generation covers difficulties and separates splits") {
  auto ts = generate_tasks(5, 438, 96);
  CHECK(ts.train.size() == 438);
  CHECK(ts.test.size() == 96);
  std::array<int, 4> by_d{};
  std::set<std::pair<int, int>> train_pairs;
  for (const auto& t : ts.train) {
    CHECK(is_valid(t));
    CHECK(t.split == core::Split::Train);
    ++by_d[static_cast<std::size_t>(t.difficulty)];
    if (t.goal.query >= 0) train_pairs.insert({t.goal.site, t.goal.query});
  }
  CHECK(by_d[1] > 0);
  CHECK(by_d[2] > 0);
  CHECK(by_d[3] > 0);
  for (const auto& t : ts.test) {
    CHECK(t.split == core::Split::Test);
    if (t.goal.query >= 0) CHECK(train_pairs.count({t.goal.site, t.goal.query}) == 0);
  }
  // instruction carries the goal
  const auto& t = ts.test.front();
  CHECK(t.instruction == make_instruction(t.goal, QueryCatalog::standard()));
}

TEST_CASE("query catalog lookup") {
  const auto& c = QueryCatalog::standard();
  CHECK(c.size() == 40);
  for (int q = 0; q < c.size(); ++q) CHECK(c.lookup(c.queries[static_cast<std::size_t>(q)]) == q);
  CHECK(c.lookup({}) == -1);
}

TEST_CASE("oracle shortest path solves every task") {
  fx::SmallWorld w(7, 120, 48);
  auto env = w.make_env();
  CHECK_NOTHROW(validate_tasks(*w.graph, w.tasks.all(), 20));
  for (const auto& task : w.tasks.all()) {
    env.reset(task);
    const auto plan = oracle_shortest_path(env, task);
    CHECK(static_cast<int>(plan.size()) <= task.difficulty * 3);
    core::Rng rng(0);
    StepOutcome out;
    for (const auto& a : plan) out = env.step(a, rng);
    CHECK(env.state().success);
    CHECK(out.reward == 1.0);
  }
}

TEST_CASE("recovery distance stays within half the long horizon") {
  fx::SmallWorld w(9);
  for (const auto& task : w.tasks.all()) CHECK(max_recovery_distance(*w.graph, task) <= 10);
}

TEST_CASE("reset puts the device on the home screen") {
  fx::SmallWorld w;
  auto env = w.make_env(false);
  const auto o = env.reset(w.tasks.train[0]);
  CHECK(o.current.screen.kind == ScreenKind::Home);
  CHECK(o.previous.screen.kind == ScreenKind::None);
  CHECK(o.step_index == 0);
  CHECK(env.episode_counter() == 1);
  env.reset(w.tasks.train[1]);
  CHECK(env.episode_counter() == 2);
}

TEST_CASE("rewards are terminal only and episodes end at H") {
  fx::SmallWorld w;
  auto env = w.make_env(false);
  core::Rng rng(3);
  env.reset(w.tasks.train[0]);
  int steps = 0;
  StepOutcome out;
  while (!env.done()) {
    out = env.step(Action::press(Button::Home), rng);
    ++steps;
    if (!out.done) CHECK(out.reward == 0.0);
  }
  CHECK(steps == 20);
  CHECK(out.reward == 0.0);
  CHECK_THROWS_AS(env.step(Action::press(Button::Home), rng), InvariantError);
}

TEST_CASE("goal predicate") {
  core::GoalSpec g{2, 5, false};
  PageState p;
  p.screen = {ScreenKind::Results, 2, 5};
  CHECK(goal_holds(p, g));
  p.overlay = true;
  CHECK_FALSE(goal_holds(p, g));  // covered by a pop-up
  p.overlay = false;
  p.screen.query = 6;
  CHECK_FALSE(goal_holds(p, g));
  g.select_first = true;
  p.screen = {ScreenKind::Detail, 2, 5, 0};
  CHECK(goal_holds(p, g));
  p.screen.rank = 1;
  CHECK_FALSE(goal_holds(p, g));
  PageState landing;
  landing.screen = {ScreenKind::Landing, 1};
  CHECK(goal_holds(landing, core::GoalSpec{1, -1, false}));
  CHECK_FALSE(goal_holds(PageState{}, core::GoalSpec{1, -1, false}));
}

TEST_CASE("drift relocates exactly magnitude * drift widgets, on site pages only") {
  fx::SmallWorld w;
  EnvConfig cfg = w.env;
  cfg.drift_period = 10;
  cfg.drift_magnitude = 0.2;
  DeviceEnv env(w.graph, cfg);
  const int expected = static_cast<int>(std::lround(0.2 * w.graph->drift_widgets()));
  CHECK(env.moves_per_epoch() == expected);

  for (int e = 1; e <= 4; ++e) {
    const auto& a = env.layout_for_epoch(e - 1);
    const auto& b = env.layout_for_epoch(e);
    CHECK(Layout::count_moves(a, b) == expected);
    for (std::size_t u = 0; u < w.graph->units().size(); ++u) {
      if (!drifts(w.graph->units()[u])) CHECK(a.cells[u] == b.cells[u]);
      std::set<int> used(b.cells[u].begin(), b.cells[u].end());
      CHECK(used.size() == b.cells[u].size());  // no two widgets share a cell
    }
  }

  // crossing the boundary between two resets
  core::Rng rng(1);
  for (int i = 0; i < 9; ++i) env.reset(w.tasks.train[0]);
  const auto before = env.layout();
  env.reset(w.tasks.train[0]);
  CHECK(env.drift_epoch() == 1);
  env.reset(w.tasks.train[0]);
  CHECK(Layout::count_moves(before, env.layout()) == expected);
}

TEST_CASE("no drift keeps the layout") {
  fx::SmallWorld w;
  EnvConfig cfg = w.env;
  cfg.drift_period = EnvConfig::kNoDrift;
  DeviceEnv env(w.graph, cfg);
  env.set_episode_counter(1'000'000);
  env.reset(w.tasks.train[0]);
  CHECK(Layout::count_moves(env.layout(), w.graph->base_layout()) == 0);
}

TEST_CASE("drift keeps every task solvable") {
  fx::SmallWorld w;
  EnvConfig cfg = w.env.deterministic();
  cfg.drift_period = 1;
  DeviceEnv env(w.graph, cfg);
  for (int e = 0; e < 12; ++e) {
    const auto& task = w.tasks.train[static_cast<std::size_t>(e) % w.tasks.train.size()];
    auto t = fx::oracle_episode(env, task);
    CHECK(t.succeeded());
  }
}

TEST_CASE("pop-ups block the goal until dismissed") {
  fx::SmallWorld w;
  EnvConfig cfg = w.env;
  cfg.p_popup = 1.0;
  cfg.p_loadfail = 0.0;
  cfg.drift_period = EnvConfig::kNoDrift;
  DeviceEnv env(w.graph, cfg);
  core::Rng rng(2);
  env.reset(w.tasks.train[0]);
  auto out = env.step(Action::press(Button::Back), rng);
  CHECK(out.observation.current.screen.kind == ScreenKind::Overlay);
  const auto& st = env.state();
  CHECK(st.page.dismiss_cell != st.page.ad_cell);
  const int popups = st.popups;
  env.step(Action::press(Button::Back), rng);  // BACK closes it, a fresh one pops at once
  CHECK(env.state().page.overlay);
  CHECK(env.state().popups == popups + 1);
}

TEST_CASE("load failures keep the page") {
  fx::SmallWorld w;
  EnvConfig cfg = w.env.deterministic();
  cfg.p_loadfail = 1.0;
  DeviceEnv env(w.graph, cfg);
  core::Rng rng(2);
  env.reset(w.tasks.train[0]);
  const auto plan = oracle_shortest_path(env, w.tasks.train[0]);
  env.step(plan.front(), rng);
  CHECK(env.state().page.screen.kind == ScreenKind::Home);
  CHECK(env.state().load_failures == 1);
}

TEST_CASE("captions name what the instruction asks for") {
  namespace v = core::vocab;
  CHECK(caption_of(widget_id(WidgetFamily::BrowserIcon), -1) == v::kGoTo);
  CHECK(caption_of(widget_id(WidgetFamily::SiteLink, 3), -1) == v::site_token(3));
  CHECK(caption_of(widget_id(WidgetFamily::SearchBar), -1) == v::kSearchFor);
  CHECK(caption_of(widget_id(WidgetFamily::ResultSlot, 2), 0) == v::kSelectFirst);
  CHECK(caption_of(widget_id(WidgetFamily::ResultSlot, 2), 1) == 0);
  CHECK(caption_of(widget_id(WidgetFamily::Banner), -1) == 0);
}

TEST_CASE("trace rendering") {
  fx::SmallWorld w;
  auto env = w.make_env();
  auto t = fx::oracle_episode(env, w.tasks.train[0]);
  const auto text = render_trace(t);
  CHECK(text.find("h=0 screen=") == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(t.steps.size()));
}

TEST_CASE("env config validation and overrides") {
  EnvConfig c;
  CHECK(c.p_popup == doctest::Approx(0.10));
  CHECK(c.p_loadfail == doctest::Approx(0.05));
  CHECK(c.drift_period == 200);
  CHECK(c.drift_magnitude == doctest::Approx(0.2));
  c.apply({{"drift_period", "inf"}});
  CHECK(c.drift_period == EnvConfig::kNoDrift);
  CHECK(c.to_map().at("drift_period") == "inf");
  c.drift_magnitude = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(c.apply({{"bogus", "1"}}), ConfigError);
}
