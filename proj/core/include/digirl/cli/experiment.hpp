#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "digirl/cli/pipeline.hpp"

namespace digirl::cli {

enum class Recipe { Offline, OffToOn, FrozenVsContinual, Ablate, BenchScaling, Eval };

/// "offline", "off2on", "frozen-vs-continual", "ablate", "bench-scaling", "eval"
std::string to_string(Recipe r);
Recipe recipe_from_string(const std::string& s);

struct ExperimentSpec {
  Recipe recipe = Recipe::OffToOn;
  core::RunConfig run;
  synthdevice::EnvConfig env;
  std::vector<algo::AlgoVariant> variants;  ///< empty: recipe default
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;

  // Protocol sizes.
  int n_train = 438;
  int n_test = 96;
  int demos_per_task = 2;          ///< oracle demonstrations per train task
  int offline_trajectories = 500;  ///< behaviour-policy data before going online
  int offline_budget = 1500;       ///< offline recipe: the whole budget up front
  int online_iterations = 63;      ///< 63 x 16 ~ 1000 online trajectories
  int frozen_epochs = 5;           ///< drift epochs after the warm checkpoint
  int final_eval_rollouts = 200;
  int drift_eval_rollouts = 480;
  FarmSetup farm;

  // eval recipe
  std::filesystem::path policy_path;  ///< empty: zero-weight policy
  std::int64_t eval_clock = 0;

  // bench-scaling recipe
  std::vector<int> bench_workers{1, 2, 4, 8};
  int bench_trajectories = 256;
  double bench_p_recoverable = 0.02;

  std::ostream* log = nullptr;  ///< progress lines; null = silent

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Variants this spec runs once defaults are applied.
  std::vector<algo::AlgoVariant> resolved_variants() const;
};

/// The five-way ablation grid.
std::vector<algo::AlgoVariant> ablation_variants(double awr_beta = 0.1);

/// Directory-safe variant name ("vanilla_awr:0.1" -> "vanilla_awr_0.1").
std::string dir_name(const algo::AlgoVariant& v);

struct DriftPoint {
  int epoch = 0;
  std::int64_t clock = 0;
  double frozen = 0.0;
  double continual = 0.0;
};

struct RunResult {
  Recipe recipe = Recipe::OffToOn;
  algo::AlgoVariant variant;
  std::uint64_t seed = 0;
  double test_success = 0.0;
  double train_success = 0.0;
  std::array<double, 3> test_by_difficulty{};
  double bc_test_initial = 0.0;  ///< BC on demos at clock 0
  double bc_test_final = 0.0;    ///< the same BC policy at the final clock
  evaluator::FailureHistogram failures;
  evaluator::FailureHistogram bc_failures;
  std::vector<algo::CurveRow> curve;
  std::vector<DriftPoint> drift;
  std::int64_t clock_end = 0;
  std::int64_t trajectories = 0;  ///< environment trajectories consumed by training
  std::filesystem::path dir;
};

struct ScalingPoint {
  int workers = 0;
  int trajectories = 0;
  double virtual_minutes = 0.0;
  double traj_per_min = 0.0;
  double speedup = 0.0;
};

struct FaultCheck {
  int workers = 0;
  double p_recoverable = 0.0;
  int aggregated = 0;
  int valid = 0;
  int recoverable_resets = 0;
  double validity_rate() const { return aggregated ? static_cast<double>(valid) / aggregated : 0.0; }
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::vector<ScalingPoint> scaling;
  std::optional<FaultCheck> faults;
};

/// Runs every (variant, seed) of the spec and writes the artifact tree:
///   <out>/spec.json, <out>/summary.json
///   <out>/<variant>/seed<k>/{curve.csv, failures.csv, result.json,
///        trajectories.jsonl, policy.bin, v_step.bin, v_instruct.bin,
///        bc_policy.bin, drift.csv (frozen-vs-continual), checkpoint/}
/// Online runs checkpoint after every iteration and resume from there.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// One (variant, seed) cell of the grid.
RunResult run_one(const ExperimentSpec& spec, const algo::AlgoVariant& variant, std::uint64_t seed);

/// Throughput sweep and fault-injection validity check.
ExperimentResult run_bench_scaling(const ExperimentSpec& spec);

// Aggregation over seeds.
double mean(const std::vector<double>& xs);
double stddev(const std::vector<double>& xs);  ///< sample standard deviation; 0 for n < 2

/// Seed-averaged test curve: rows where every run has a test value.
std::vector<std::pair<int, double>> mean_test_curve(const std::vector<const RunResult*>& runs);

/// First iteration whose seed-averaged test success reaches `threshold`.
std::optional<int> iterations_to_threshold(const std::vector<std::pair<int, double>>& curve, double threshold);

/// Seed-averaged drift curve.
std::vector<DriftPoint> mean_drift(const std::vector<const RunResult*>& runs);

/// Prints the Table-1 grid and the failure histogram of an artifact tree.
/// Read-only; missing or malformed files are reported per file.
void report(const std::filesystem::path& dir, std::ostream& os);

}  // namespace digirl::cli
