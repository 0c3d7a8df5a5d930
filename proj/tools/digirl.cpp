// digirl: command line front end for the experiment recipes.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "digirl/cli/experiment.hpp"
#include "digirl/core/error.hpp"
#include "digirl/core/run_config.hpp"
#include "digirl/core/serialize.hpp"

namespace fs = std::filesystem;
using namespace digirl;

namespace {

// Flags shared by every verb that builds an ExperimentSpec.
struct Common {
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string run_config;
  std::string env_config;
  std::vector<std::string> run_sets;
  std::vector<std::string> env_sets;
  int horizon = 20;
  int workers = 4;
  double latency_ms = 3000.0;
  int n_train = 438;
  int n_test = 96;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool seeds_required) {
  auto* seed = app->add_option("--seed", c.seeds, "seed(s); repeat or comma-separate")->delimiter(',');
  if (seeds_required) seed->required();
  app->add_option("--out", c.out, "output directory");
  app->add_option("--config", c.run_config, "run config file (key = value); overrides flags");
  app->add_option("--env-config", c.env_config, "environment config file; overrides flags");
  app->add_option("--set", c.run_sets, "run config override key=value");
  app->add_option("--env", c.env_sets, "environment override key=value");
  app->add_option("--horizon", c.horizon, "episode horizon H")->check(CLI::PositiveNumber);
  app->add_option("--workers", c.workers, "rollout workers")->check(CLI::PositiveNumber);
  app->add_option("--latency-ms", c.latency_ms, "virtual per-step latency");
  app->add_option("--n-train", c.n_train, "train tasks")->check(CLI::PositiveNumber);
  app->add_option("--n-test", c.n_test, "test tasks")->check(CLI::PositiveNumber);
  app->add_flag("--quiet", c.quiet, "no progress output");
}

std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + s + "' is not key=value");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

cli::ExperimentSpec make_spec(const Common& c, cli::Recipe recipe) {
  cli::ExperimentSpec spec;
  spec.recipe = recipe;
  spec.seeds = c.seeds;
  spec.out_dir = c.out;
  spec.run.horizon = c.horizon;
  spec.env.horizon = c.horizon;
  spec.farm.workers = c.workers;
  spec.farm.latency_ms = c.latency_ms;
  spec.n_train = c.n_train;
  spec.n_test = c.n_test;
  spec.run.apply(parse_sets(c.run_sets));
  spec.env.apply(parse_sets(c.env_sets));
  if (!c.run_config.empty()) spec.run.apply(core::read_kv_file(c.run_config));
  if (!c.env_config.empty()) spec.env.apply(core::read_kv_file(c.env_config));
  if (!c.quiet) spec.log = &std::cerr;
  return spec;
}

std::vector<algo::AlgoVariant> parse_variants(const std::vector<std::string>& names) {
  std::vector<algo::AlgoVariant> out;
  for (const auto& n : names) out.push_back(algo::AlgoVariant::parse(n));
  return out;
}

void print_runs(const cli::ExperimentResult& res) {
  for (const auto& r : res.runs) {
    std::cout << cli::to_string(r.recipe) << ' ' << r.variant.name() << " seed " << r.seed << ": test "
              << r.test_success << " train " << r.train_success;
    if (r.recipe != cli::Recipe::Eval) std::cout << " bc_on_demos " << r.bc_test_final;
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DigiRL desk-scale training system"};
  app.require_subcommand(1);

  // gen-tasks
  auto* gen = app.add_subcommand("gen-tasks", "write the task split and screen graph of a world");
  Common gen_c;
  add_common(gen, gen_c, true);

  // collect
  auto* col = app.add_subcommand("collect", "roll out a policy on train tasks through the farm");
  Common col_c;
  std::string col_policy;
  int col_n = 64;
  std::int64_t col_clock = 0;
  add_common(col, col_c, true);
  col->add_option("--policy", col_policy, "policy snapshot; default zero weights");
  col->add_option("-n,--trajectories", col_n, "number of rollouts")->check(CLI::PositiveNumber);
  col->add_option("--clock", col_clock, "drift clock of the first rollout");

  // train-offline
  auto* off = app.add_subcommand("train-offline", "offline recipe: all data collected up front");
  Common off_c;
  std::vector<std::string> off_variants;
  int off_budget = 1500;
  add_common(off, off_c, true);
  off->add_option("--variant", off_variants, "algorithm variant(s)")->delimiter(',');
  off->add_option("--budget", off_budget, "offline trajectories")->check(CLI::PositiveNumber);

  // train-online
  auto* on = app.add_subcommand("train-online", "offline-to-online recipe (or the drift study)");
  Common on_c;
  std::vector<std::string> on_variants;
  std::string on_recipe = "off2on";
  int on_iters = 63, on_offline = 500, on_epochs = 5, on_drift_evals = 480;
  add_common(on, on_c, true);
  on->add_option("--variant", on_variants, "algorithm variant(s)")->delimiter(',');
  on->add_option("--recipe", on_recipe, "off2on or frozen-vs-continual")
      ->check(CLI::IsMember({"off2on", "frozen-vs-continual"}));
  on->add_option("--iterations", on_iters, "online iterations (warm-up for the drift study)");
  on->add_option("--offline-trajectories", on_offline, "behaviour data before going online");
  on->add_option("--frozen-epochs", on_epochs, "drift epochs after the checkpoint");
  on->add_option("--drift-eval-rollouts", on_drift_evals, "test rollouts per arm and epoch in the drift study");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a snapshot on test tasks");
  Common ev_c;
  std::string ev_policy;
  std::int64_t ev_clock = 0;
  int ev_n = 200;
  add_common(ev, ev_c, true);
  ev->add_option("--policy", ev_policy, "policy snapshot; default zero weights");
  ev->add_option("--clock", ev_clock, "drift clock to evaluate at");
  ev->add_option("-n,--rollouts", ev_n, "test rollouts")->check(CLI::PositiveNumber);

  // ablate
  auto* ab = app.add_subcommand("ablate", "five-way ablation with shared seeds");
  Common ab_c;
  double ab_beta = 0.1;
  int ab_iters = 63;
  add_common(ab, ab_c, true);
  ab->add_option("--awr-beta", ab_beta, "temperature of the vanilla AWR arm")->check(CLI::PositiveNumber);
  ab->add_option("--iterations", ab_iters, "online iterations");

  // bench-scaling
  auto* bs = app.add_subcommand("bench-scaling", "farm throughput against worker count");
  Common bs_c;
  std::vector<int> bs_workers{1, 2, 4, 8};
  int bs_n = 256;
  double bs_p = 0.02;
  add_common(bs, bs_c, false);
  bs->add_option("--worker-counts", bs_workers, "worker counts")->delimiter(',');
  bs->add_option("-n,--trajectories", bs_n, "trajectories per point")->check(CLI::PositiveNumber);
  bs->add_option("--p-recoverable", bs_p, "fault probability per step for the validity check");

  // report
  auto* rep = app.add_subcommand("report", "print the result grid of an artifact directory");
  std::string rep_dir;
  rep->add_option("dir", rep_dir, "artifact directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto spec = make_spec(gen_c, cli::Recipe::Eval);
      spec.run.validate();
      spec.env.validate();
      const fs::path out = gen_c.out.empty() ? fs::path(".") : fs::path(gen_c.out);
      fs::create_directories(out);
      for (auto seed : gen_c.seeds) {
        auto world = cli::World::make(seed, spec.env, spec.n_train, spec.n_test);
        const auto stem = "seed" + std::to_string(seed);
        std::ofstream(out / (stem + "_tasks.json")) << core::tasks_to_json(world.tasks.all()) << '\n';
        std::ofstream(out / (stem + "_graph.json")) << world.graph->to_json(world.graph->base_layout()) << '\n';
        std::cout << stem << ": " << world.tasks.train.size() << " train, " << world.tasks.test.size()
                  << " test tasks, " << world.graph->total_widgets() << " widgets\n";
      }
    } else if (col->parsed()) {
      auto spec = make_spec(col_c, cli::Recipe::Eval);
      spec.validate();
      for (auto seed : col_c.seeds) {
        auto world = cli::World::make(seed, spec.env, spec.n_train, spec.n_test);
        cli::Harness h(world, spec.run, spec.farm, seed);
        h.set_clock(col_clock);
        auto p = col_policy.empty() ? algo::Agent::fresh().policy : policy::PolicySnapshot::load(col_policy);
        auto run = h.collect(p, col_n, 0);
        const fs::path out = col_c.out.empty() ? fs::path(".") : fs::path(col_c.out);
        fs::create_directories(out);
        core::save_jsonl(out / ("seed" + std::to_string(seed) + "_rollouts.jsonl"), run.trajectories);
        std::cout << run.to_json() << '\n';
      }
    } else if (off->parsed()) {
      auto spec = make_spec(off_c, cli::Recipe::Offline);
      spec.variants = parse_variants(off_variants);
      spec.offline_budget = off_budget;
      print_runs(cli::run_experiment(spec));
    } else if (on->parsed()) {
      auto spec = make_spec(on_c, cli::recipe_from_string(on_recipe));
      spec.variants = parse_variants(on_variants);
      spec.online_iterations = on_iters;
      spec.offline_trajectories = on_offline;
      spec.frozen_epochs = on_epochs;
      spec.drift_eval_rollouts = on_drift_evals;
      auto res = cli::run_experiment(spec);
      print_runs(res);
      for (const auto& r : res.runs) {
        for (const auto& p : r.drift) {
          std::cout << "  epoch " << p.epoch << " frozen " << p.frozen << " continual " << p.continual << '\n';
        }
      }
    } else if (ev->parsed()) {
      auto spec = make_spec(ev_c, cli::Recipe::Eval);
      spec.policy_path = ev_policy;
      spec.eval_clock = ev_clock;
      spec.final_eval_rollouts = ev_n;
      auto res = cli::run_experiment(spec);
      for (const auto& r : res.runs) {
        std::cout << "seed " << r.seed << ": test " << r.test_success << " (d1 " << r.test_by_difficulty[0] << ", d2 "
                  << r.test_by_difficulty[1] << ", d3 " << r.test_by_difficulty[2] << ")\n";
      }
    } else if (ab->parsed()) {
      auto spec = make_spec(ab_c, cli::Recipe::Ablate);
      spec.variants = cli::ablation_variants(ab_beta);
      spec.online_iterations = ab_iters;
      print_runs(cli::run_experiment(spec));
    } else if (bs->parsed()) {
      auto spec = make_spec(bs_c, cli::Recipe::BenchScaling);
      if (spec.seeds.empty()) spec.seeds = {1};
      spec.bench_workers = bs_workers;
      spec.bench_trajectories = bs_n;
      spec.bench_p_recoverable = bs_p;
      auto res = cli::run_experiment(spec);
      std::cout << "workers,traj_per_min,speedup\n";
      for (const auto& s : res.scaling) std::cout << s.workers << ',' << s.traj_per_min << ',' << s.speedup << '\n';
      if (res.faults) {
        std::cout << "fault validity " << res.faults->valid << '/' << res.faults->aggregated << " with "
                  << res.faults->recoverable_resets << " restarts\n";
      }
    } else if (rep->parsed()) {
      cli::report(rep_dir, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
