#include "digirl/core/serialize.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "digirl/core/error.hpp"
#include "json.hpp"

namespace digirl::core {

using nlohmann::json;

namespace {

json action_json(const Action& a) {
  switch (a.kind()) {
    case ActionKind::Tap:
      return {{"kind", "Tap"}, {"x", a.as_tap().x}, {"y", a.as_tap().y}};
    case ActionKind::Type:
      return {{"kind", "Type"}, {"tokens", a.as_type().tokens}};
    case ActionKind::Press:
      return {{"kind", "Press"}, {"button", to_string(a.as_press().button)}};
  }
  return {};
}

Action action_of(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "Tap") return Action::tap(j.at("x").get<int>(), j.at("y").get<int>());
  if (kind == "Type") return Action::type(j.at("tokens").get<std::vector<TokenId>>());
  if (kind == "Press") {
    const auto b = j.at("button").get<std::string>();
    if (b == "HOME") return Action::press(Button::Home);
    if (b == "BACK") return Action::press(Button::Back);
    if (b == "ENTER") return Action::press(Button::Enter);
    throw InvariantError("unknown button '" + b + "'");
  }
  throw InvariantError("unknown action kind '" + kind + "'");
}

json screen_json(const ScreenView& s) {
  json widgets = json::array();
  for (const auto& w : s.widgets) widgets.push_back({w.widget, w.cell, w.label, w.caption});
  return {{"kind", to_string(s.screen.kind)},
          {"site", s.screen.site},
          {"query", s.screen.query},
          {"rank", s.screen.rank},
          {"index", s.screen.index},
          {"widgets", std::move(widgets)},
          {"typed", s.typed}};
}

ScreenView screen_of(const json& j) {
  ScreenView s;
  s.screen.kind = screen_kind_from_string(j.at("kind").get<std::string>());
  s.screen.site = j.at("site").get<int>();
  s.screen.query = j.at("query").get<int>();
  s.screen.rank = j.at("rank").get<int>();
  s.screen.index = j.at("index").get<int>();
  for (const auto& w : j.at("widgets")) {
    s.widgets.push_back({w.at(0).get<int>(), w.at(1).get<int>(), w.at(2).get<int>(),
                         w.size() > 3 ? w.at(3).get<TokenId>() : 0});
  }
  s.typed = j.at("typed").get<std::vector<TokenId>>();
  return s;
}

json task_json(const Task& t) {
  return {{"id", t.id},
          {"instruction_features", t.instruction},
          {"difficulty", t.difficulty},
          {"goal_spec",
           {{"site", t.goal.site}, {"query", t.goal.query}, {"select_first", t.goal.select_first}}},
          {"split", t.split == Split::Train ? "train" : "test"}};
}

Task task_of(const json& j) {
  Task t;
  t.id = j.at("id").get<int>();
  t.instruction = j.at("instruction_features").get<std::vector<TokenId>>();
  t.difficulty = j.at("difficulty").get<int>();
  const auto& g = j.at("goal_spec");
  t.goal.site = g.at("site").get<int>();
  t.goal.query = g.at("query").get<int>();
  t.goal.select_first = g.at("select_first").get<bool>();
  t.split = j.at("split").get<std::string>() == "test" ? Split::Test : Split::Train;
  if (!is_valid(t)) throw InvariantError("task " + std::to_string(t.id) + " is malformed");
  return t;
}

json trajectory_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"observation",
                      {{"current_screen", screen_json(s.observation.current)},
                       {"previous_screen", screen_json(s.observation.previous)},
                       {"step_index", s.observation.step_index}}},
                     {"action", action_json(s.action)},
                     {"reward", s.reward},
                     {"done", s.done}});
  }
  return {{"task", task_json(t.task)},
          {"steps", std::move(steps)},
          {"final_reward", t.final_reward},
          {"policy_version", t.policy_version},
          {"wallclock_epoch", t.wallclock_epoch}};
}

Trajectory trajectory_of(const json& j) {
  Trajectory t;
  t.task = task_of(j.at("task"));
  for (const auto& s : j.at("steps")) {
    Step step;
    const auto& o = s.at("observation");
    step.observation.current = screen_of(o.at("current_screen"));
    step.observation.previous = screen_of(o.at("previous_screen"));
    step.observation.step_index = o.at("step_index").get<int>();
    step.action = action_of(s.at("action"));
    step.reward = s.at("reward").get<double>();
    step.done = s.at("done").get<bool>();
    t.steps.push_back(std::move(step));
  }
  t.final_reward = j.at("final_reward").get<double>();
  t.policy_version = j.at("policy_version").get<std::int64_t>();
  t.wallclock_epoch = j.at("wallclock_epoch").get<std::int64_t>();
  return t;
}

template <typename Fn>
auto guarded(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw InvariantError(what + ": " + e.what());
  }
}

}  // namespace

std::string to_json(const Action& a) { return action_json(a).dump(); }
std::string to_json(const Task& t) { return task_json(t).dump(); }
std::string to_json(const Trajectory& t) { return trajectory_json(t).dump(); }

Action action_from_json(const std::string& text) {
  return guarded("action", [&] { return action_of(json::parse(text)); });
}
Task task_from_json(const std::string& text) {
  return guarded("task", [&] { return task_of(json::parse(text)); });
}
Trajectory trajectory_from_json(const std::string& text) {
  return guarded("trajectory", [&] { return trajectory_of(json::parse(text)); });
}

void write_jsonl(std::ostream& os, const std::vector<Trajectory>& ts) {
  for (const auto& t : ts) os << trajectory_json(t).dump() << '\n';
}

std::vector<Trajectory> read_jsonl(std::istream& is) {
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(trajectory_from_json(line));
  }
  return out;
}

void save_jsonl(const std::filesystem::path& path, const std::vector<Trajectory>& ts) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_jsonl(out, ts);
}

std::vector<Trajectory> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return read_jsonl(in);
}

std::string tasks_to_json(const std::vector<Task>& tasks) {
  json arr = json::array();
  for (const auto& t : tasks) arr.push_back(task_json(t));
  return arr.dump(1);
}

std::vector<Task> tasks_from_json(const std::string& text) {
  return guarded("task list", [&] {
    std::vector<Task> out;
    for (const auto& j : json::parse(text)) out.push_back(task_of(j));
    return out;
  });
}

}  // namespace digirl::core
