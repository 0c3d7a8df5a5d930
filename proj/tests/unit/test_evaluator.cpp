#include <sstream>

#include "digirl/core/error.hpp"
#include "digirl/evaluator/evaluator.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace digirl;
using namespace digirl::synthdevice;
using evaluator::FailureMode;
using core::Action;

namespace {

const core::Task& find_task(const fx::SmallWorld& w, int difficulty, int not_site = -1) {
  for (const auto& t : w.tasks.train) {
    if (t.difficulty == difficulty && t.goal.site != not_site) return t;
  }
  throw std::runtime_error("no such task");
}

// A no-op everywhere except the search page.
Action noop() { return Action::type({1}); }

struct Episode {
  core::Trajectory t;
  EnvTrace trace;
};

// Runs `task` while acting out the shortest plan of `script_task`, then no-ops.
Episode scripted_episode(DeviceEnv& env, const core::Task& task, const core::Task& script_task, int plan_len = -1) {
  env.reset(task);
  auto plan = oracle_shortest_path(env, script_task);
  if (plan_len >= 0) plan.resize(static_cast<std::size_t>(plan_len));
  auto i = std::make_shared<std::size_t>(0);
  ActFn act = [plan, i](const core::Observation&, const core::Task&, core::Rng&) {
    return *i < plan.size() ? plan[(*i)++] : noop();
  };
  env.set_episode_counter(env.episode_counter() - 1);
  Episode e;
  core::Rng rng(5);
  e.t = run_episode(env, task, act, rng, 0, &e.trace);
  return e;
}

}  // namespace

TEST_CASE("oracle evaluation follows the goal predicate") {
  fx::SmallWorld w;
  auto env = w.make_env();
  const auto& task = w.tasks.train[0];
  auto t = fx::oracle_episode(env, task);
  CHECK(evaluator::oracle_evaluate(env.state(), task).success);
  CHECK(evaluator::oracle_evaluate(env.state(), task).source == evaluator::EvalSource::Oracle);
  env.reset(task);
  CHECK_FALSE(evaluator::oracle_evaluate(env.state(), task).success);
}

TEST_CASE("noisy evaluator") {
  fx::SmallWorld w;
  auto env = w.make_env();
  const auto& task = w.tasks.train[0];
  fx::oracle_episode(env, task);
  core::Rng rng(11);
  for (int i = 0; i < 1000; ++i) CHECK(evaluator::noisy_evaluate(env.state(), task, 0.0, rng).success);

  int flips = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) flips += evaluator::noisy_evaluate(env.state(), task, 0.028, rng).success ? 0 : 1;
  CHECK(std::abs(static_cast<double>(flips) / n - 0.028) < 0.005);

  CHECK_THROWS_AS(evaluator::noisy_evaluate(env.state(), task, 0.5, rng), InvariantError);
  CHECK_THROWS_AS(evaluator::noisy_evaluate(env.state(), task, -0.1, rng), InvariantError);
}

TEST_CASE("relabel flips whole trajectories and keeps them well formed") {
  fx::SmallWorld w;
  auto env = w.make_env();
  const auto t = fx::oracle_episode(env, w.tasks.train[0]);
  core::Rng rng(3);
  int flips = 0;
  for (int i = 0; i < 10000; ++i) {
    auto u = t;
    evaluator::relabel(u, 0.028, rng);
    CHECK(validate(u, 20).empty());
    flips += u.final_reward != t.final_reward;
  }
  CHECK(std::abs(flips / 10000.0 - 0.028) < 0.005);
}

TEST_CASE("failure classification") {
  fx::SmallWorld w;
  auto env = w.make_env();

  SUBCASE("success is None") {
    const auto& task = find_task(w, 2);
    EnvTrace trace;
    core::Rng rng(1);
    auto t = run_episode(env, task, fx::oracle(env), rng, 0, &trace);
    CHECK(evaluator::classify_failure(t, trace, *w.graph) == FailureMode::None);
  }
  SUBCASE("idling at home is StuckMidway") {
    const auto& task = find_task(w, 1);
    auto e = scripted_episode(env, task, task, 0);
    CHECK_FALSE(e.t.succeeded());
    CHECK(evaluator::classify_failure(e.t, e.trace, *w.graph) == FailureMode::StuckMidway);
  }
  SUBCASE("stalling halfway is StuckMidway") {
    const auto& task = find_task(w, 3);
    auto e = scripted_episode(env, task, task, 2);  // parked on the landing page
    CHECK(evaluator::classify_failure(e.t, e.trace, *w.graph) == FailureMode::StuckMidway);
  }
  SUBCASE("the right kind of page on the wrong site is WrongGoal") {
    const auto& task = find_task(w, 1);
    const auto& other = find_task(w, 1, task.goal.site);
    auto e = scripted_episode(env, task, other);
    CHECK(e.t.steps.size() == 20);
    CHECK(evaluator::classify_failure(e.t, e.trace, *w.graph) == FailureMode::WrongGoal);
  }
  SUBCASE("a detour that never comes back is FailToRecover") {
    const auto& task = find_task(w, 2);
    const auto& other = find_task(w, 1, task.goal.site);
    auto e = scripted_episode(env, task, other);
    CHECK(evaluator::classify_failure(e.t, e.trace, *w.graph) == FailureMode::FailToRecover);
  }
  SUBCASE("lost steps beyond the slack are TechnicalIssue") {
    EnvConfig cfg = w.env.deterministic();
    cfg.p_loadfail = 1.0;
    DeviceEnv broken(w.graph, cfg);
    const auto& task = find_task(w, 2);
    EnvTrace trace;
    core::Rng rng(1);
    auto t = run_episode(broken, task, fx::oracle(broken), rng, 0, &trace);
    CHECK(trace.load_failures > 0);
    CHECK(evaluator::classify_failure(t, trace, *w.graph) == FailureMode::TechnicalIssue);
  }
}

TEST_CASE("failure histogram and csv") {
  evaluator::FailureHistogram h;
  h.add(FailureMode::None);
  h.add(FailureMode::FailToRecover);
  h.add(FailureMode::FailToRecover);
  h.add(FailureMode::WrongGoal);
  CHECK(h.failed() == 3);
  CHECK(h.fraction(FailureMode::FailToRecover) == doctest::Approx(2.0 / 3.0));
  CHECK(h.fraction(FailureMode::None) == 0.0);
  CHECK(evaluator::FailureHistogram{}.fraction(FailureMode::WrongGoal) == 0.0);

  std::ostringstream os;
  evaluator::write_failure_csv(os, "digirl/seed1", h);
  const auto text = os.str();
  CHECK(text.rfind("run_id,mode,count,fraction\n", 0) == 0);
  CHECK(text.find("digirl/seed1,fail_to_recover,2,") != std::string::npos);
  CHECK(text.find(",none,") == std::string::npos);
  for (auto m : evaluator::kFailureModes) CHECK(evaluator::failure_mode_from_string(to_string(m)) == m);
}
