#include <filesystem>
#include <fstream>
#include <sstream>
#include <streambuf>

#include "digirl/cli/experiment.hpp"
#include "digirl/core/error.hpp"
#include "doctest.h"

using namespace digirl;
using namespace digirl::cli;
namespace fs = std::filesystem;

namespace {

// Throws once the n-th progress line mentioning "iteration" has been written.
class Tripwire : public std::streambuf {
 public:
  explicit Tripwire(int n) : left_(n) {}

 protected:
  int_type overflow(int_type c) override {
    if (c == traits_type::eof()) return traits_type::not_eof(c);
    if (c != '\n') {
      line_ += static_cast<char>(c);
      return c;
    }
    const bool hit = line_.find("] iteration ") != std::string::npos;
    line_.clear();
    if (hit && --left_ == 0) throw std::runtime_error("interrupted");
    return c;
  }

 private:
  int left_;
  std::string line_;
};

ExperimentSpec tiny(const fs::path& out) {
  ExperimentSpec s;
  s.recipe = Recipe::OffToOn;
  s.out_dir = out;
  s.seeds = {1};
  s.n_train = 24;
  s.n_test = 8;
  s.demos_per_task = 1;
  s.offline_trajectories = 32;
  s.online_iterations = 5;
  s.final_eval_rollouts = 16;
  s.farm.workers = 2;
  s.run.eval_every = 1;
  s.run.eval_rollouts = 8;
  s.run.rollouts_per_iter = 8;
  s.run.offline_actor_iters = 2;
  s.run.offline_value_iters = 2;
  s.run.actor_updates_per_iter = 2;
  s.run.value_updates_per_iter = 2;
  s.run.instruct_updates_per_iter = 2;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("recipe names round trip") {
  for (auto r : {Recipe::Offline, Recipe::OffToOn, Recipe::FrozenVsContinual, Recipe::Ablate, Recipe::BenchScaling,
                 Recipe::Eval}) {
    CHECK(recipe_from_string(to_string(r)) == r);
  }
  CHECK_THROWS_AS(recipe_from_string("online"), ConfigError);
}

TEST_CASE("spec validation names the field") {
  auto s = tiny({});
  CHECK_NOTHROW(s.validate());
  auto expect = [](ExperimentSpec bad, const std::string& field) {
    try {
      bad.validate();
      FAIL("accepted a bad spec");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  auto a = s;
  a.seeds.clear();
  expect(a, "seeds");
  auto b = s;
  b.run.horizon = 10;
  expect(b, "horizon");
  auto c = s;
  c.recipe = Recipe::FrozenVsContinual;
  c.env.drift_period = synthdevice::EnvConfig::kNoDrift;
  expect(c, "drift_period");
  auto d = s;
  d.recipe = Recipe::BenchScaling;
  d.bench_workers = {4, 0};
  expect(d, "bench_workers");
  auto e = s;
  e.recipe = Recipe::Eval;
  e.policy_path = "/nonexistent/policy.bin";
  expect(e, "policy");
}

TEST_CASE("variant grid and directory names") {
  const auto g = ablation_variants(0.1);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == algo::AlgoVariant{});
  CHECK(g.back() == algo::AlgoVariant::vanilla_awr(0.1));
  CHECK(dir_name(algo::AlgoVariant::vanilla_awr(0.1)) == "vanilla_awr_0.1");
  CHECK(dir_name(algo::AlgoVariant{}) == "digirl");
  ExperimentSpec s;
  CHECK(s.resolved_variants().size() == 1);
  s.recipe = Recipe::Ablate;
  CHECK(s.resolved_variants().size() == 5);
}

TEST_CASE("aggregation helpers") {
  CHECK(mean({1, 2, 3, 6}) == doctest::Approx(3.0));
  CHECK(stddev({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(2.138).epsilon(1e-3));
  CHECK(stddev({3}) == 0.0);
  const std::vector<std::pair<int, double>> curve{{5, 0.2}, {10, 0.45}, {15, 0.5}, {20, 0.4}};
  CHECK(iterations_to_threshold(curve, 0.45) == 10);
  CHECK(iterations_to_threshold(curve, 0.5) == 15);
  CHECK_FALSE(iterations_to_threshold(curve, 0.6).has_value());

  RunResult a, b;
  a.curve = {{1, 8, 0, 0.2, 0, 0}, {2, 16, 0, std::nullopt, 0, 0}, {3, 24, 0, 0.6, 0, 0}};
  b.curve = {{1, 8, 0, 0.4, 0, 0}, {2, 16, 0, 0.5, 0, 0}, {3, 24, 0, 0.2, 0, 0}};
  const auto m = mean_test_curve({&a, &b});
  REQUIRE(m.size() == 2);
  CHECK(m[0].first == 1);
  CHECK(m[0].second == doctest::Approx(0.3));
  CHECK(m[1].first == 3);
  CHECK(m[1].second == doctest::Approx(0.4));
}

TEST_CASE("harness clock") {
  auto world = World::make(2, synthdevice::EnvConfig{}, 24, 8);
  Harness h(world, core::RunConfig{}, FarmSetup{2, 3000.0, {}}, 1);
  const policy::PolicySnapshot p;
  const auto e1 = h.evaluate(p, world.tasks.test, 16, 3);
  CHECK(h.clock() == 0);
  const auto e2 = h.evaluate(p, world.tasks.test, 16, 3);
  CHECK(e1.success == e2.success);
  CHECK(e1.trajectories == e2.trajectories);
  h.collect(p, 10, 4);
  CHECK(h.clock() == 10);
  const auto demos = h.oracle_demos(1);
  CHECK(demos.size() == 24);
  for (const auto& t : demos) CHECK(t.succeeded());
}

TEST_CASE("interrupted runs resume bit-identically") {
  const auto ref_dir = fresh_dir("digirl_resume_ref");
  const auto cut_dir = fresh_dir("digirl_resume_cut");

  const auto ref = run_one(tiny(ref_dir), algo::AlgoVariant{}, 1);

  Tripwire trip(3);
  std::ostream log(&trip);
  log.exceptions(std::ios::badbit);
  auto spec = tiny(cut_dir);
  spec.log = &log;
  CHECK_THROWS_AS(run_one(spec, algo::AlgoVariant{}, 1), std::runtime_error);
  CHECK(fs::exists(cut_dir / "digirl" / "seed1" / "checkpoint"));
  CHECK_FALSE(fs::exists(cut_dir / "digirl" / "seed1" / "result.json"));

  std::ostringstream log2;
  spec.log = &log2;
  const auto resumed = run_one(spec, algo::AlgoVariant{}, 1);
  CHECK(log2.str().find("resuming after iteration") != std::string::npos);
  CHECK(resumed.test_success == ref.test_success);
  const auto a = ref_dir / "digirl" / "seed1";
  const auto b = cut_dir / "digirl" / "seed1";
  CHECK(slurp(a / "curve.csv") == slurp(b / "curve.csv"));
  CHECK(slurp(a / "policy.bin") == slurp(b / "policy.bin"));
  CHECK(slurp(a / "trajectories.jsonl") == slurp(b / "trajectories.jsonl"));
  CHECK(slurp(a / "value_audit.csv").rfind("task_id,fitted_value,empirical_rate\n", 0) == 0);
  CHECK(slurp(a / "value_audit.csv") == slurp(b / "value_audit.csv"));

  // a finished run is not redone; a different spec in the same place is refused
  CHECK(run_one(spec, algo::AlgoVariant{}, 1).test_success == ref.test_success);
  auto other = tiny(cut_dir);
  other.run.actor_lr = 0.5;
  CHECK_THROWS_AS(run_one(other, algo::AlgoVariant{}, 1), ConfigError);

  fs::remove_all(ref_dir);
  fs::remove_all(cut_dir);
}

TEST_CASE("report survives missing and malformed files") {
  const auto dir = fresh_dir("digirl_report");
  std::ostringstream os;
  CHECK_NOTHROW(report(dir, os));
  CHECK_FALSE(os.str().empty());
  fs::create_directories(dir / "digirl" / "seed1");
  std::ofstream(dir / "digirl" / "seed1" / "result.json") << "{not json";
  std::ostringstream os2;
  CHECK_NOTHROW(report(dir, os2));
  CHECK(os2.str().find("result.json") != std::string::npos);
  fs::remove_all(dir);
}
