#include "digirl/cli/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "digirl/core/error.hpp"
#include "digirl/core/serialize.hpp"
#include "json.hpp"

namespace digirl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRecipeNames[] = {"offline", "off2on", "frozen-vs-continual", "ablate", "bench-scaling", "eval"};

// Stream ids for the harness; distinct per purpose.
constexpr std::uint64_t kOfflineStream = 0x0ff;
constexpr std::uint64_t kOnlineStream = 0x0411;
constexpr std::uint64_t kFinalStream = 0xf1a1;
constexpr std::uint64_t kBcStream = 0xbc0;
constexpr std::uint64_t kDriftStream = 0xd41f;

void logf(const ExperimentSpec& spec, const std::string& line) {
  if (spec.log) *spec.log << line << std::endl;
}

std::string fmt(double x, int prec = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << x;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write " + tmp.string());
    os << text;
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json histogram_json(const evaluator::FailureHistogram& h) {
  json j = json::object();
  for (auto m : evaluator::kFailureModes) j[evaluator::to_string(m)] = h.count(m);
  return j;
}

evaluator::FailureHistogram histogram_of(const json& j) {
  evaluator::FailureHistogram h;
  for (auto m : evaluator::kFailureModes) {
    h.counts[static_cast<std::size_t>(m)] = j.value(evaluator::to_string(m), 0);
  }
  return h;
}

json curve_json(const std::vector<algo::CurveRow>& curve) {
  json rows = json::array();
  for (const auto& r : curve) {
    rows.push_back({{"iteration", r.iteration},
                    {"n_traj", r.n_traj},
                    {"train_success", r.train_success},
                    {"test_success", r.test_success ? json(*r.test_success) : json(nullptr)},
                    {"mean_A_instruct", r.mean_a_instruct},
                    {"filtered_fraction", r.filtered_fraction}});
  }
  return rows;
}

std::vector<algo::CurveRow> curve_of(const json& rows) {
  std::vector<algo::CurveRow> out;
  for (const auto& j : rows) {
    algo::CurveRow r;
    r.iteration = j.at("iteration").get<int>();
    r.n_traj = j.at("n_traj").get<std::int64_t>();
    r.train_success = j.at("train_success").get<double>();
    if (!j.at("test_success").is_null()) r.test_success = j.at("test_success").get<double>();
    r.mean_a_instruct = j.at("mean_A_instruct").get<double>();
    r.filtered_fraction = j.at("filtered_fraction").get<double>();
    out.push_back(r);
  }
  return out;
}

json drift_json(const std::vector<DriftPoint>& pts) {
  json out = json::array();
  for (const auto& p : pts) {
    out.push_back({{"epoch", p.epoch}, {"clock", p.clock}, {"frozen", p.frozen}, {"continual", p.continual}});
  }
  return out;
}

std::vector<DriftPoint> drift_of(const json& j) {
  std::vector<DriftPoint> out;
  for (const auto& p : j) {
    out.push_back({p.at("epoch").get<int>(), p.at("clock").get<std::int64_t>(), p.at("frozen").get<double>(),
                   p.at("continual").get<double>()});
  }
  return out;
}

json result_json(const RunResult& r) {
  return {{"recipe", to_string(r.recipe)},
          {"variant", r.variant.name()},
          {"seed", r.seed},
          {"test_success", r.test_success},
          {"train_success", r.train_success},
          {"test_by_difficulty", r.test_by_difficulty},
          {"bc_test_initial", r.bc_test_initial},
          {"bc_test_final", r.bc_test_final},
          {"failures", histogram_json(r.failures)},
          {"bc_failures", histogram_json(r.bc_failures)},
          {"curve", curve_json(r.curve)},
          {"drift", drift_json(r.drift)},
          {"clock_end", r.clock_end},
          {"trajectories", r.trajectories}};
}

RunResult result_of(const json& j) {
  RunResult r;
  r.recipe = recipe_from_string(j.at("recipe").get<std::string>());
  r.variant = algo::AlgoVariant::parse(j.at("variant").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.test_success = j.at("test_success").get<double>();
  r.train_success = j.at("train_success").get<double>();
  r.test_by_difficulty = j.at("test_by_difficulty").get<std::array<double, 3>>();
  r.bc_test_initial = j.at("bc_test_initial").get<double>();
  r.bc_test_final = j.at("bc_test_final").get<double>();
  r.failures = histogram_of(j.at("failures"));
  r.bc_failures = histogram_of(j.at("bc_failures"));
  r.curve = curve_of(j.at("curve"));
  r.drift = drift_of(j.at("drift"));
  r.clock_end = j.at("clock_end").get<std::int64_t>();
  r.trajectories = j.at("trajectories").get<std::int64_t>();
  return r;
}

json spec_json(const ExperimentSpec& s) {
  json variants = json::array();
  for (const auto& v : s.resolved_variants()) variants.push_back(v.name());
  return {{"recipe", to_string(s.recipe)},
          {"run_config", s.run.to_map()},
          {"env_config", s.env.to_map()},
          {"variants", variants},
          {"seeds", s.seeds},
          {"n_train", s.n_train},
          {"n_test", s.n_test},
          {"demos_per_task", s.demos_per_task},
          {"offline_trajectories", s.offline_trajectories},
          {"offline_budget", s.offline_budget},
          {"online_iterations", s.online_iterations},
          {"frozen_epochs", s.frozen_epochs},
          {"final_eval_rollouts", s.final_eval_rollouts},
          {"drift_eval_rollouts", s.drift_eval_rollouts},
          {"workers", s.farm.workers},
          {"latency_ms", s.farm.latency_ms},
          {"policy", s.policy_path.string()},
          {"eval_clock", s.eval_clock}};
}

// Identity of one online run, checked before resuming from a checkpoint.
std::string run_fingerprint(const ExperimentSpec& s, const algo::AlgoVariant& v, std::uint64_t seed) {
  json j = spec_json(s);
  j.erase("variants");
  j.erase("seeds");
  j["variant"] = v.name();
  j["seed"] = seed;
  return j.dump();
}

std::string rng_state(const core::Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

core::Rng rng_from(const std::string& s) {
  core::Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw Error("corrupt generator state in checkpoint");
  return rng;
}

void append_jsonl(const fs::path& path, const std::vector<core::Trajectory>& ts) {
  std::ofstream os(path, std::ios::app | std::ios::binary);
  if (!os) throw Error("cannot append to " + path.string());
  core::write_jsonl(os, ts);
}

// First n lines of a JSONL log; rewrites the file when it holds more (an
// iteration interrupted between logging and checkpointing).
std::vector<core::Trajectory> read_log_prefix(const fs::path& path, std::int64_t n) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::vector<core::Trajectory> out;
  std::string line, kept;
  std::int64_t extra = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (static_cast<std::int64_t>(out.size()) < n) {
      out.push_back(core::trajectory_from_json(line));
      kept += line;
      kept += '\n';
    } else {
      ++extra;
    }
  }
  if (static_cast<std::int64_t>(out.size()) < n) throw Error("trajectory log shorter than its checkpoint");
  if (extra > 0) write_text(path, kept);
  return out;
}

void save_agent(const algo::Agent& a, const fs::path& dir) {
  fs::create_directories(dir);
  // save() writes in place, so stage under temporary names and rename.
  a.policy.save(dir / "policy.bin.tmp");
  a.v_step.save(dir / "v_step.bin.tmp");
  a.v_instruct.save(dir / "v_instruct.bin.tmp");
  fs::rename(dir / "policy.bin.tmp", dir / "policy.bin");
  fs::rename(dir / "v_step.bin.tmp", dir / "v_step.bin");
  fs::rename(dir / "v_instruct.bin.tmp", dir / "v_instruct.bin");
}

algo::Agent load_agent(const fs::path& dir) {
  return {policy::PolicySnapshot::load(dir / "policy.bin"), values::ValueHead::load(dir / "v_step.bin"),
          values::ValueHead::load(dir / "v_instruct.bin")};
}

void write_curve_csv(const fs::path& path, const std::vector<algo::CurveRow>& curve) {
  std::ostringstream os;
  algo::write_curve_header(os);
  for (const auto& r : curve) algo::write_curve_row(os, r);
  write_text(path, os.str());
}

void write_drift_csv(const fs::path& path, const std::vector<DriftPoint>& pts) {
  std::ostringstream os;
  os << "epoch,clock,frozen_success,continual_success\n";
  for (const auto& p : pts) os << p.epoch << ',' << p.clock << ',' << p.frozen << ',' << p.continual << '\n';
  write_text(path, os.str());
}

// Iterations after warm-up needed to reach the end of the last studied epoch.
struct DriftPlan {
  std::int64_t warm_clock = 0;
  int warm_epoch = 0;
  int total_iterations = 0;
};

DriftPlan plan_drift(const ExperimentSpec& s) {
  DriftPlan p;
  const std::int64_t period = s.env.drift_period;
  const std::int64_t r = s.run.rollouts_per_iter;
  p.warm_clock = s.offline_trajectories + static_cast<std::int64_t>(s.online_iterations) * r;
  p.warm_epoch = static_cast<int>(p.warm_clock / period);
  const std::int64_t end_clock = (p.warm_epoch + s.frozen_epochs + 1) * period;
  p.total_iterations = s.online_iterations + static_cast<int>((end_clock - p.warm_clock + r - 1) / r);
  return p;
}

}  // namespace

std::string to_string(Recipe r) { return kRecipeNames[static_cast<int>(r)]; }

Recipe recipe_from_string(const std::string& s) {
  for (int i = 0; i < static_cast<int>(std::size(kRecipeNames)); ++i) {
    if (s == kRecipeNames[i]) return static_cast<Recipe>(i);
  }
  throw ConfigError("field 'recipe': unknown recipe '" + s + "'");
}

std::vector<algo::AlgoVariant> ablation_variants(double awr_beta) {
  using V = algo::AlgoVariant;
  return {V{V::DigiRL}, V{V::FilteredBC}, V{V::NoStepAdvantage}, V{V::RegressionValues}, V::vanilla_awr(awr_beta)};
}

std::string dir_name(const algo::AlgoVariant& v) {
  auto s = v.name();
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}

std::vector<algo::AlgoVariant> ExperimentSpec::resolved_variants() const {
  if (!variants.empty()) return variants;
  if (recipe == Recipe::Ablate) return ablation_variants();
  return {algo::AlgoVariant{}};
}

void ExperimentSpec::validate() const {
  auto require = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(std::string("field '") + field + "': " + what);
  };
  run.validate();
  env.validate();
  require(!seeds.empty(), "seeds", "at least one seed is required");
  require(run.horizon == env.horizon, "horizon", "run and environment horizons differ");
  require(n_train > 0, "n_train", "must be positive");
  require(n_test > 0, "n_test", "must be positive");
  require(demos_per_task > 0, "demos_per_task", "must be positive");
  require(final_eval_rollouts > 0, "final_eval_rollouts", "must be positive");
  require(farm.workers > 0, "workers", "must be positive");
  require(farm.latency_ms >= 0, "latency_ms", "must be non-negative");
  for (const auto& v : resolved_variants()) v.validate();
  switch (recipe) {
    case Recipe::Offline:
      require(offline_budget > 0, "offline_budget", "must be positive");
      break;
    case Recipe::FrozenVsContinual:
      require(env.drift_period != synthdevice::EnvConfig::kNoDrift, "drift_period",
              "frozen-vs-continual needs a drifting environment");
      require(frozen_epochs > 0, "frozen_epochs", "must be positive");
      require(drift_eval_rollouts > 0, "drift_eval_rollouts", "must be positive");
      [[fallthrough]];
    case Recipe::OffToOn:
    case Recipe::Ablate:
      require(offline_trajectories > 0, "offline_trajectories", "must be positive");
      require(online_iterations > 0, "online_iterations", "must be positive");
      break;
    case Recipe::BenchScaling:
      require(!bench_workers.empty(), "bench_workers", "at least one worker count");
      for (int w : bench_workers) require(w > 0, "bench_workers", "worker counts must be positive");
      require(bench_trajectories > 0, "bench_trajectories", "must be positive");
      require(bench_p_recoverable >= 0 && bench_p_recoverable < 1, "bench_p_recoverable", "must lie in [0, 1)");
      break;
    case Recipe::Eval:
      require(policy_path.empty() || fs::exists(policy_path), "policy", "no such file " + policy_path.string());
      require(eval_clock >= 0, "eval_clock", "must be non-negative");
      break;
  }
}

RunResult run_one(const ExperimentSpec& spec, const algo::AlgoVariant& variant, std::uint64_t seed) {
  RunResult res;
  res.recipe = spec.recipe;
  res.variant = variant;
  res.seed = seed;
  const bool artifacts = !spec.out_dir.empty();
  if (artifacts) {
    res.dir = spec.out_dir / (spec.recipe == Recipe::Eval ? std::string("eval") : dir_name(variant)) /
              ("seed" + std::to_string(seed));
    if (fs::exists(res.dir / "result.json")) {
      const auto j = json::parse(read_text(res.dir / "result.json"));
      if (j.value("fingerprint", std::string()) != run_fingerprint(spec, variant, seed)) {
        throw ConfigError("output directory " + res.dir.string() + " holds results of a different experiment");
      }
      auto done = result_of(j);
      done.dir = res.dir;
      logf(spec, "[" + to_string(spec.recipe) + " " + variant.name() + " seed " + std::to_string(seed) +
                     "] already complete");
      return done;
    }
    fs::create_directories(res.dir);
  }
  const std::string tag = "[" + to_string(spec.recipe) + " " + variant.name() + " seed " + std::to_string(seed) + "] ";

  World world = World::make(seed, spec.env, spec.n_train, spec.n_test);
  Harness h(world, spec.run, spec.farm, seed);
  const auto& test = world.tasks.test;
  const auto& train = world.tasks.train;

  auto finish = [&](const algo::Agent& agent, const policy::PolicySnapshot* bc,
                    const std::vector<core::TrajectoryPtr>& seen = {}) {
    auto fin = h.evaluate(agent.policy, test, spec.final_eval_rollouts, kFinalStream, true);
    res.test_success = fin.success;
    res.test_by_difficulty = fin.by_difficulty;
    res.failures = fin.failures;
    res.train_success = h.evaluate(agent.policy, train, spec.final_eval_rollouts, kFinalStream + 1).success;
    if (bc) {
      auto b = h.evaluate(*bc, test, spec.final_eval_rollouts, kFinalStream, true);
      res.bc_test_final = b.success;
      res.bc_failures = b.failures;
    }
    res.clock_end = h.clock();
    logf(spec, tag + "test " + fmt(res.test_success) + " train " + fmt(res.train_success) +
                   (bc ? " bc@end " + fmt(res.bc_test_final) : std::string()));
    if (artifacts) {
      save_agent(agent, res.dir);
      std::ostringstream f;
      evaluator::write_failure_csv(f, dir_name(variant) + "/seed" + std::to_string(seed), res.failures, true);
      if (bc) evaluator::write_failure_csv(f, "bc_on_demos/seed" + std::to_string(seed), res.bc_failures, false);
      write_text(res.dir / "failures.csv", f.str());
      write_curve_csv(res.dir / "curve.csv", res.curve);
      if (!res.drift.empty()) write_drift_csv(res.dir / "drift.csv", res.drift);
      if (!seen.empty()) {
        std::ostringstream a;
        values::write_value_audit(a, agent.v_instruct, seen);
        write_text(res.dir / "value_audit.csv", a.str());
      }
      auto j = result_json(res);
      j["fingerprint"] = run_fingerprint(spec, variant, seed);
      write_text(res.dir / "result.json", j.dump(1));
    }
  };

  if (spec.recipe == Recipe::Eval) {
    auto agent = algo::Agent::fresh();
    if (!spec.policy_path.empty()) agent.policy = policy::PolicySnapshot::load(spec.policy_path);
    h.set_clock(spec.eval_clock);
    finish(agent, nullptr);
    return res;
  }

  const fs::path ckpt = res.dir / "checkpoint";
  const fs::path log_path = res.dir / "trajectories.jsonl";
  const bool resuming = artifacts && fs::exists(ckpt / "state.json");

  algo::Agent bc;
  if (resuming) {
    bc.policy = policy::PolicySnapshot::load(res.dir / "bc_policy.bin");
  } else {
    bc = h.bc_on_demos(spec.demos_per_task);
    if (artifacts) bc.policy.save(res.dir / "bc_policy.bin");
  }
  res.bc_test_initial = h.evaluate(bc.policy, test, spec.final_eval_rollouts, kBcStream).success;
  logf(spec, tag + "bc on demos, test " + fmt(res.bc_test_initial));

  if (spec.recipe == Recipe::Offline) {
    if (artifacts && fs::exists(log_path)) fs::remove(log_path);
    auto data = h.collect(bc.policy, spec.offline_budget, kOfflineStream);
    if (artifacts) append_jsonl(log_path, data.trajectories);
    auto rng = core::derive_rng(seed, {0x0ff1});
    auto agent = algo::run_offline(variant, data.trajectories, spec.run, bc, rng);
    res.trajectories = spec.offline_budget;
    std::vector<core::TrajectoryPtr> seen;
    for (const auto& t : data.trajectories) seen.push_back(std::make_shared<const core::Trajectory>(t));
    finish(agent, &bc.policy, seen);
    return res;
  }

  // Offline warm-up followed by online iterations.
  const bool drift_study = spec.recipe == Recipe::FrozenVsContinual;
  const DriftPlan plan = drift_study ? plan_drift(spec) : DriftPlan{};
  const int total_iterations = drift_study ? plan.total_iterations : spec.online_iterations;
  const std::string fingerprint = run_fingerprint(spec, variant, seed);

  algo::OnlineState st{algo::Agent::fresh(), core::ReplayBuffer(spec.run.buffer_capacity, spec.run.horizon),
                       core::derive_rng(seed, {kOnlineStream}), 0, 0, {}};
  std::int64_t logged = 0;
  int next_epoch = plan.warm_epoch + 1;
  std::optional<policy::PolicySnapshot> frozen;

  if (resuming) {
    const auto s = json::parse(read_text(ckpt / "state.json"));
    if (s.at("fingerprint").get<std::string>() != fingerprint) {
      throw ConfigError("checkpoint in " + ckpt.string() + " belongs to a different experiment; remove it");
    }
    st.agent = load_agent(ckpt);
    st.rng = rng_from(s.at("rng").get<std::string>());
    st.iteration = s.at("iteration").get<int>();
    st.n_traj = s.at("n_traj").get<std::int64_t>();
    st.curve = curve_of(s.at("curve"));
    res.drift = drift_of(s.at("drift"));
    next_epoch = s.at("next_epoch").get<int>();
    logged = s.at("logged").get<std::int64_t>();
    h.set_clock(s.at("clock").get<std::int64_t>());
    for (auto& t : read_log_prefix(log_path, logged)) st.buffer.push(std::move(t));
    if (fs::exists(ckpt / "frozen_policy.bin")) frozen = policy::PolicySnapshot::load(ckpt / "frozen_policy.bin");
    logf(spec, tag + "resuming after iteration " + std::to_string(st.iteration));
  } else {
    if (artifacts) {
      fs::remove_all(ckpt);
      fs::remove(log_path);
    }
    auto data = h.collect(bc.policy, spec.offline_trajectories, kOfflineStream);
    if (artifacts) append_jsonl(log_path, data.trajectories);
    logged = static_cast<std::int64_t>(data.trajectories.size());
    auto rng = core::derive_rng(seed, {0x0ff1});
    st.agent = algo::run_offline(variant, data.trajectories, spec.run, bc, rng);
    for (auto& t : data.trajectories) st.buffer.push(std::move(t));
    logf(spec, tag + "offline phase on " + std::to_string(spec.offline_trajectories) + " trajectories");
  }

  auto hooks = h.hooks(kOnlineStream, true);
  auto collect = hooks.collect;
  hooks.collect = [&](const policy::PolicySnapshot& p, int n, int it) {
    auto b = collect(p, n, it);
    if (artifacts) append_jsonl(log_path, b.trajectories);
    logged += static_cast<std::int64_t>(b.trajectories.size());
    return b;
  };
  hooks.after_iteration = [&](int it) {
    const auto& row = st.curve.back();
    if (row.test_success) {
      logf(spec, tag + "iteration " + std::to_string(it) + " trajectories " + std::to_string(row.n_traj) +
                     " train " + fmt(row.train_success) + " test " + fmt(*row.test_success));
    }
    if (drift_study) {
      const std::int64_t period = spec.env.drift_period;
      if (it == spec.online_iterations) {
        frozen = st.agent.policy;
        const double v = h.evaluate(*frozen, test, spec.drift_eval_rollouts, kDriftStream).success;
        res.drift.push_back({plan.warm_epoch, h.clock(), v, v});
        logf(spec, tag + "checkpoint at epoch " + std::to_string(plan.warm_epoch) + ": " + fmt(v));
      }
      while (frozen && next_epoch <= plan.warm_epoch + spec.frozen_epochs && h.clock() >= (next_epoch + 1) * period) {
        const std::int64_t at = (next_epoch + 1) * period - 1;
        const auto stream = kDriftStream + static_cast<std::uint64_t>(next_epoch);
        DriftPoint p{next_epoch, at, h.evaluate_at(at, *frozen, test, spec.drift_eval_rollouts, stream).success,
                     h.evaluate_at(at, st.agent.policy, test, spec.drift_eval_rollouts, stream).success};
        res.drift.push_back(p);
        logf(spec, tag + "epoch " + std::to_string(p.epoch) + ": frozen " + fmt(p.frozen) + " continual " +
                       fmt(p.continual));
        ++next_epoch;
      }
    }
    if (artifacts) {
      save_agent(st.agent, ckpt);
      if (frozen && !fs::exists(ckpt / "frozen_policy.bin")) frozen->save(ckpt / "frozen_policy.bin");
      json s{{"fingerprint", fingerprint},
             {"iteration", st.iteration},
             {"n_traj", st.n_traj},
             {"clock", h.clock()},
             {"rng", rng_state(st.rng)},
             {"curve", curve_json(st.curve)},
             {"drift", drift_json(res.drift)},
             {"next_epoch", next_epoch},
             {"logged", logged}};
      write_text(ckpt / "state.json", s.dump());
      write_curve_csv(res.dir / "curve.csv", st.curve);
    }
  };
  algo::run_online(variant, st, hooks, spec.run, total_iterations);

  res.curve = st.curve;
  res.trajectories = spec.offline_trajectories + st.n_traj;
  finish(st.agent, &bc.policy, st.buffer.snapshot());
  if (artifacts) {
    if (frozen) frozen->save(res.dir / "frozen_policy.bin");
    fs::remove_all(ckpt);
  }
  return res;
}

ExperimentResult run_bench_scaling(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult out;
  const auto seed = spec.seeds.front();
  World world = World::make(seed, spec.env, spec.n_train, spec.n_test);
  auto p = spec.policy_path.empty() ? algo::Agent::fresh().policy : policy::PolicySnapshot::load(spec.policy_path);
  farm::FarmConfig fc;
  fc.seed = core::hash_words({seed, 0xbe4c});
  fc.temperature = spec.run.temperature;
  double base = 0.0;
  for (int w : spec.bench_workers) {
    auto run = farm::collect(p, world.tasks.test, farm::make_workers(w, seed, spec.farm.latency_ms),
                             spec.bench_trajectories, world.factory(), fc);
    ScalingPoint pt{w, static_cast<int>(run.trajectories.size()), run.virtual_minutes(), run.traj_per_min(), 0.0};
    if (out.scaling.empty()) base = pt.traj_per_min / w;
    pt.speedup = base > 0 ? pt.traj_per_min / base : 0.0;
    out.scaling.push_back(pt);
    logf(spec, "[bench-scaling] workers " + std::to_string(w) + ": " + fmt(pt.traj_per_min, 2) + " traj/min, x" +
                   fmt(pt.speedup, 2));
  }
  FaultCheck fault;
  fault.workers = *std::max_element(spec.bench_workers.begin(), spec.bench_workers.end());
  fault.p_recoverable = spec.bench_p_recoverable;
  auto run = farm::collect(p, world.tasks.test,
                           farm::make_workers(fault.workers, seed, spec.farm.latency_ms, {spec.bench_p_recoverable, 0.0}),
                           spec.bench_trajectories, world.factory(), fc);
  fault.aggregated = static_cast<int>(run.trajectories.size());
  for (const auto& t : run.trajectories) fault.valid += core::validate(t, spec.env.horizon).empty() ? 1 : 0;
  fault.recoverable_resets = run.recoverable_resets;
  out.faults = fault;
  logf(spec, "[bench-scaling] faults p=" + fmt(fault.p_recoverable) + ": " + std::to_string(fault.valid) + "/" +
                 std::to_string(fault.aggregated) + " valid, " + std::to_string(fault.recoverable_resets) +
                 " episode restarts");
  if (!spec.out_dir.empty()) {
    fs::create_directories(spec.out_dir);
    std::ostringstream os;
    os << "workers,trajectories,virtual_minutes,traj_per_min,speedup\n";
    for (const auto& s : out.scaling) {
      os << s.workers << ',' << s.trajectories << ',' << s.virtual_minutes << ',' << s.traj_per_min << ','
         << s.speedup << '\n';
    }
    write_text(spec.out_dir / "scaling.csv", os.str());
    json f{{"workers", fault.workers},
           {"p_recoverable", fault.p_recoverable},
           {"aggregated", fault.aggregated},
           {"valid", fault.valid},
           {"validity_rate", fault.validity_rate()},
           {"recoverable_resets", fault.recoverable_resets}};
    write_text(spec.out_dir / "faults.json", f.dump(1));
  }
  return out;
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::vector<std::pair<int, double>> mean_test_curve(const std::vector<const RunResult*>& runs) {
  std::vector<std::pair<int, double>> out;
  if (runs.empty()) return out;
  std::map<int, std::vector<double>> at;
  for (const auto* r : runs) {
    for (const auto& row : r->curve) {
      if (row.test_success) at[row.iteration].push_back(*row.test_success);
    }
  }
  for (const auto& [it, xs] : at) {
    if (xs.size() == runs.size()) out.emplace_back(it, mean(xs));
  }
  return out;
}

std::optional<int> iterations_to_threshold(const std::vector<std::pair<int, double>>& curve, double threshold) {
  for (const auto& [it, v] : curve) {
    if (v >= threshold) return it;
  }
  return std::nullopt;
}

std::vector<DriftPoint> mean_drift(const std::vector<const RunResult*>& runs) {
  std::vector<DriftPoint> out;
  if (runs.empty()) return out;
  std::size_t n = runs.front()->drift.size();
  for (const auto* r : runs) n = std::min(n, r->drift.size());
  for (std::size_t i = 0; i < n; ++i) {
    DriftPoint p;
    p.epoch = static_cast<int>(i);  // position relative to the checkpoint
    for (const auto* r : runs) {
      p.frozen += r->drift[i].frozen / static_cast<double>(runs.size());
      p.continual += r->drift[i].continual / static_cast<double>(runs.size());
    }
    out.push_back(p);
  }
  return out;
}

namespace {

json summarize(const ExperimentSpec& spec, const ExperimentResult& res) {
  json variants = json::object();
  std::map<std::string, std::vector<const RunResult*>> by_variant;
  for (const auto& r : res.runs) by_variant[r.variant.name()].push_back(&r);
  auto stat = [](const std::vector<const RunResult*>& rs, auto field) {
    std::vector<double> xs;
    for (const auto* r : rs) xs.push_back(field(*r));
    return json{{"mean", mean(xs)}, {"std", stddev(xs)}, {"values", xs}};
  };
  for (const auto& [name, rs] : by_variant) {
    json v{{"seeds", rs.size()},
           {"test_success", stat(rs, [](const RunResult& r) { return r.test_success; })},
           {"train_success", stat(rs, [](const RunResult& r) { return r.train_success; })},
           {"bc_test_initial", stat(rs, [](const RunResult& r) { return r.bc_test_initial; })},
           {"bc_test_final", stat(rs, [](const RunResult& r) { return r.bc_test_final; })}};
    json curve = json::array();
    for (const auto& [it, x] : mean_test_curve(rs)) curve.push_back({it, x});
    v["mean_test_curve"] = curve;
    if (spec.recipe == Recipe::FrozenVsContinual) v["mean_drift"] = drift_json(mean_drift(rs));
    variants[name] = v;
  }
  json out{{"recipe", to_string(spec.recipe)}, {"variants", variants}};
  if (spec.recipe == Recipe::Ablate && by_variant.count("filtered_bc")) {
    std::vector<double> fbc;
    for (const auto* r : by_variant["filtered_bc"]) fbc.push_back(r->test_success);
    const double threshold = mean(fbc);
    json reach = json::object();
    for (const auto& [name, rs] : by_variant) {
      auto it = iterations_to_threshold(mean_test_curve(rs), threshold);
      reach[name] = it ? json(*it) : json(nullptr);
    }
    out["threshold"] = threshold;
    out["iterations_to_threshold"] = reach;
  }
  if (!res.scaling.empty()) {
    json sc = json::array();
    for (const auto& s : res.scaling) sc.push_back({{"workers", s.workers}, {"traj_per_min", s.traj_per_min}, {"speedup", s.speedup}});
    out["scaling"] = sc;
  }
  if (res.faults) out["fault_validity_rate"] = res.faults->validity_rate();
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  if (!spec.out_dir.empty()) {
    fs::create_directories(spec.out_dir);
    write_text(spec.out_dir / "spec.json", spec_json(spec).dump(1));
  }
  ExperimentResult res;
  if (spec.recipe == Recipe::BenchScaling) {
    res = run_bench_scaling(spec);
  } else {
    for (const auto& v : spec.resolved_variants()) {
      for (auto seed : spec.seeds) res.runs.push_back(run_one(spec, v, seed));
    }
  }
  if (!spec.out_dir.empty()) write_text(spec.out_dir / "summary.json", summarize(spec, res).dump(1));
  return res;
}

void report(const fs::path& dir, std::ostream& os) {
  if (!fs::is_directory(dir)) {
    os << "missing: " << dir.string() << " is not a directory\n";
    return;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == "result.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  // (recipe, variant) -> runs, in first-seen order
  std::vector<std::pair<std::string, std::vector<RunResult>>> groups;
  for (const auto& f : files) {
    RunResult r;
    try {
      r = result_of(json::parse(read_text(f)));
    } catch (const std::exception& e) {
      os << "malformed: " << f.string() << " (" << e.what() << ")\n";
      continue;
    }
    for (const char* needed : {"curve.csv", "failures.csv"}) {
      if (!fs::exists(f.parent_path() / needed)) os << "missing: " << (f.parent_path() / needed).string() << '\n';
    }
    const auto key = to_string(r.recipe) + " " + (r.recipe == Recipe::Eval ? std::string("eval") : r.variant.name());
    auto g = std::find_if(groups.begin(), groups.end(), [&](const auto& x) { return x.first == key; });
    if (g == groups.end()) {
      groups.emplace_back(key, std::vector<RunResult>{});
      g = std::prev(groups.end());
    }
    g->second.push_back(std::move(r));
  }
  if (groups.empty()) {
    os << "no completed runs under " << dir.string() << '\n';
    return;
  }

  auto cell = [](const std::vector<double>& xs) {
    std::ostringstream c;
    c.setf(std::ios::fixed);
    c.precision(1);
    c << 100.0 * mean(xs);
    if (xs.size() > 1) c << " +/- " << 100.0 * stddev(xs);
    return c.str();
  };
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };

  os << "Success rate (%), mean +/- std over seeds\n";
  os << pad("recipe / method", 44) << pad("seeds", 7) << pad("train", 16) << "test\n";
  for (const auto& [key, runs] : groups) {
    std::vector<double> tr, te;
    for (const auto& r : runs) {
      tr.push_back(r.train_success);
      te.push_back(r.test_success);
    }
    os << pad(key, 44) << pad(std::to_string(runs.size()), 7) << pad(cell(tr), 16) << cell(te) << '\n';
  }
  for (const auto& [key, runs] : groups) {
    if (runs.front().recipe == Recipe::Eval) continue;
    std::vector<double> pre, post;
    for (const auto& r : runs) {
      pre.push_back(r.bc_test_initial);
      post.push_back(r.bc_test_final);
    }
    os << pad(key + " | bc_on_demos", 44) << pad(std::to_string(runs.size()), 7) << pad("-", 16) << cell(post)
       << "  (before drift " << cell(pre) << ")\n";
  }

  os << "\nFailure modes (fraction of failed test rollouts)\n";
  os << pad("recipe / method", 44);
  for (auto m : evaluator::kFailureModes) {
    if (m != evaluator::FailureMode::None) os << pad(evaluator::to_string(m), 17);
  }
  os << "failed\n";
  auto hist_row = [&](const std::string& label, const evaluator::FailureHistogram& h) {
    os << pad(label, 44);
    for (auto m : evaluator::kFailureModes) {
      if (m != evaluator::FailureMode::None) os << pad(fmt(h.fraction(m)), 17);
    }
    os << h.failed() << '\n';
  };
  for (const auto& [key, runs] : groups) {
    evaluator::FailureHistogram agent, bc;
    for (const auto& r : runs) {
      for (std::size_t i = 0; i < agent.counts.size(); ++i) {
        agent.counts[i] += r.failures.counts[i];
        bc.counts[i] += r.bc_failures.counts[i];
      }
    }
    hist_row(key, agent);
    if (runs.front().recipe != Recipe::Eval) hist_row(key + " | bc_on_demos", bc);
  }

  for (const auto& [key, runs] : groups) {
    if (runs.front().drift.empty()) continue;
    std::vector<const RunResult*> ptrs;
    for (const auto& r : runs) ptrs.push_back(&r);
    os << "\nDrift study " << key << " (epochs after checkpoint: frozen / continual)\n";
    for (const auto& p : mean_drift(ptrs)) os << "  +" << p.epoch << "  " << fmt(p.frozen) << " / " << fmt(p.continual) << '\n';
  }
}

}  // namespace digirl::cli
