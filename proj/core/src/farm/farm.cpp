#include "digirl/farm/farm.hpp"

#include <algorithm>
#include <limits>
#include <thread>

#include "digirl/core/error.hpp"
#include "digirl/evaluator/evaluator.hpp"
#include "digirl/farm/channel.hpp"
#include "json.hpp"

namespace digirl::farm {

namespace {

constexpr std::uint64_t kNoiseStream = 0x401e;
constexpr std::uint64_t kFaultStream = 0xfa17;

struct SlotResult {
  int slot = 0;
  core::Trajectory trajectory;
  bool success = false;
  synthdevice::EnvTrace trace;
};

struct Job {
  int slot = 0;
  int attempt = 0;
};

struct Worker {
  WorkerSpec spec;
  std::unique_ptr<synthdevice::Environment> env;
  core::Rng faults;
  double clock_ms = 0.0;
  int fatal = 0;
  int recoverable = 0;
  bool dead = false;
  std::vector<Job> queue;
  std::vector<Job> leftover;
};

enum class Fault { None, Recoverable, Fatal };

void run_worker(Worker& w, const synthdevice::ActFn& act, std::int64_t version, const std::vector<core::Task>& tasks,
                const EnvFactory& make_env, const FarmConfig& cfg, Transport<SlotResult>& out) {
  for (auto job : w.queue) {
    if (w.dead) {
      w.leftover.push_back(job);
      continue;
    }
    const auto& task = tasks[static_cast<std::size_t>(job.slot) % tasks.size()];
    for (;;) {
      auto& env = *w.env;
      if (cfg.pin_clock) {
        env.set_episode_counter(cfg.episode_base);
        env.set_episode_salt(static_cast<std::uint64_t>(job.slot) + 1);
      } else {
        env.set_episode_counter(cfg.episode_base + job.slot);
        env.set_episode_salt(0);
      }
      auto rng = core::derive_rng(cfg.seed, {static_cast<std::uint64_t>(job.slot), static_cast<std::uint64_t>(job.attempt)});

      SlotResult r;
      r.slot = job.slot;
      auto& t = r.trajectory;
      t.task = task;
      t.policy_version = version;
      t.wallclock_epoch = env.drift_epoch();
      auto obs = env.reset(task);
      const auto* st = cfg.record_traces ? env.device_state() : nullptr;
      if (st) {
        r.trace.pages = {st->page};
        r.trace.ranks = st->slot_rank;
        r.trace.horizon = env.horizon();
      }
      Fault fault = Fault::None;
      while (!env.done()) {
        core::Step s;
        s.observation = std::move(obs);
        s.action = act(s.observation, task, rng);
        auto o = env.step(s.action, rng);
        w.clock_ms += w.spec.latency_ms;
        s.reward = o.reward;
        s.done = o.done;
        obs = std::move(o.observation);
        t.steps.push_back(std::move(s));
        if (st) r.trace.pages.push_back(st->page);
        if (core::bernoulli(w.faults, w.spec.faults.p_fatal)) {
          fault = Fault::Fatal;
          break;
        }
        if (core::bernoulli(w.faults, w.spec.faults.p_recoverable)) {
          fault = Fault::Recoverable;
          break;
        }
      }
      ++job.attempt;
      if (fault == Fault::Recoverable) {
        ++w.recoverable;
        continue;
      }
      if (fault == Fault::Fatal) {
        ++w.fatal;
        if (w.fatal > cfg.restart_budget) {
          w.dead = true;
          w.leftover.push_back(job);
          break;
        }
        w.env = make_env(w.spec);
        continue;
      }
      if (st) r.trace.load_failures = st->load_failures;
      t.final_reward = t.steps.back().reward;
      r.success = t.succeeded();
      if (cfg.reward_noise > 0) {
        auto noise = core::derive_rng(cfg.seed, {kNoiseStream, static_cast<std::uint64_t>(job.slot)});
        evaluator::relabel(t, cfg.reward_noise, noise);
      }
      out.send(std::move(r));
      break;
    }
  }
}

}  // namespace

void WorkerSpec::validate() const {
  if (!(latency_ms >= 0)) throw InvariantError("worker latency must be non-negative");
  for (double p : {faults.p_recoverable, faults.p_fatal}) {
    if (!(p >= 0 && p < 1)) throw InvariantError("fault probabilities must lie in [0, 1)");
  }
}

double FarmRun::traj_per_min() const {
  if (virtual_ms <= 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(trajectories.size()) / virtual_minutes();
}

double FarmRun::true_success_rate() const {
  if (true_success.empty()) return 0.0;
  return static_cast<double>(std::count(true_success.begin(), true_success.end(), true)) /
         static_cast<double>(true_success.size());
}

std::string FarmRun::to_json() const {
  nlohmann::json j{{"workers", workers},
                   {"n_total", n_total},
                   {"collected", trajectories.size()},
                   {"policy_version", policy_version},
                   {"virtual_minutes", virtual_minutes()},
                   {"traj_per_min", virtual_ms > 0 ? traj_per_min() : 0.0},
                   {"recoverable_resets", recoverable_resets},
                   {"fatal_restarts", fatal_restarts},
                   {"discarded", discarded},
                   {"aborted", aborted}};
  return j.dump();
}

FarmRun collect(const synthdevice::ActFn& act, std::int64_t policy_version, const std::vector<core::Task>& tasks,
                const std::vector<WorkerSpec>& specs, int n_total, const EnvFactory& make_env, const FarmConfig& cfg) {
  if (specs.empty()) throw InvariantError("collect needs at least one worker");
  if (n_total < 1) throw InvariantError("collect needs n_total >= 1");
  if (tasks.empty()) throw InvariantError("collect needs tasks");
  for (const auto& s : specs) s.validate();

  std::vector<Worker> workers(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    workers[i].spec = specs[i];
    workers[i].env = make_env(specs[i]);
    workers[i].faults = core::derive_rng(specs[i].seed, {kFaultStream});
  }
  for (int k = 0; k < n_total; ++k) workers[static_cast<std::size_t>(k) % workers.size()].queue.push_back({k, 0});

  InProcessChannel<SlotResult> channel;
  std::vector<SlotResult> results;
  for (;;) {
    if (cfg.threaded) {
      std::vector<std::jthread> threads;
      for (auto& w : workers) {
        if (!w.dead && !w.queue.empty()) {
          threads.emplace_back([&, wp = &w] { run_worker(*wp, act, policy_version, tasks, make_env, cfg, channel); });
        }
      }
    } else {
      for (auto& w : workers) {
        if (!w.dead && !w.queue.empty()) run_worker(w, act, policy_version, tasks, make_env, cfg, channel);
      }
    }
    // barrier reached; hand the slots of dead workers to the survivors
    std::vector<Job> orphans;
    std::vector<Worker*> alive;
    for (auto& w : workers) {
      w.queue.clear();
      orphans.insert(orphans.end(), w.leftover.begin(), w.leftover.end());
      w.leftover.clear();
      if (!w.dead) alive.push_back(&w);
    }
    if (orphans.empty() || alive.empty()) break;
    std::sort(orphans.begin(), orphans.end(), [](const Job& a, const Job& b) { return a.slot < b.slot; });
    for (std::size_t i = 0; i < orphans.size(); ++i) alive[i % alive.size()]->queue.push_back(orphans[i]);
  }
  channel.close();
  while (auto r = channel.receive()) results.push_back(std::move(*r));
  std::sort(results.begin(), results.end(), [](const SlotResult& a, const SlotResult& b) { return a.slot < b.slot; });

  FarmRun run;
  run.policy_version = policy_version;
  run.workers = static_cast<int>(workers.size());
  run.n_total = n_total;
  run.aborted = std::all_of(workers.begin(), workers.end(), [](const Worker& w) { return w.dead; });
  double max_clock = 0.0;
  for (const auto& w : workers) {
    run.worker_ms.push_back(w.clock_ms);
    max_clock = std::max(max_clock, w.clock_ms);
    run.recoverable_resets += w.recoverable;
    run.fatal_restarts += w.fatal;
  }
  run.discarded = run.fatal_restarts;
  for (auto& r : results) {
    if (!core::validate(r.trajectory, 0).empty()) throw InvariantError("worker produced a malformed trajectory");
    run.trajectories.push_back(std::move(r.trajectory));
    run.true_success.push_back(r.success);
    if (cfg.record_traces) run.traces.push_back(std::move(r.trace));
  }
  run.virtual_ms = max_clock + cfg.aggregation_ms * static_cast<double>(run.trajectories.size());
  return run;
}

FarmRun collect(const policy::PolicySnapshot& policy, const std::vector<core::Task>& tasks,
                const std::vector<WorkerSpec>& workers, int n_total, const EnvFactory& make_env, const FarmConfig& cfg) {
  const double temperature = cfg.temperature;
  synthdevice::ActFn act = [&policy, temperature](const core::Observation& o, const core::Task& t, core::Rng& rng) {
    return policy::act(policy, o, t, temperature, rng);
  };
  return collect(act, policy.version(), tasks, workers, n_total, make_env, cfg);
}

std::vector<WorkerSpec> make_workers(int n, std::uint64_t seed, double latency_ms, FaultProfile faults) {
  std::vector<WorkerSpec> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({i, core::hash_words({seed, static_cast<std::uint64_t>(i)}), latency_ms, faults});
  }
  return out;
}

core::Observation FixedLengthEnv::reset(const core::Task&) {
  steps_ = 0;
  ++counter_;
  core::Observation o;
  o.current.screen = {core::ScreenKind::Generic, -1, -1, -1, 0};
  return o;
}

synthdevice::StepOutcome FixedLengthEnv::step(const core::Action&, core::Rng&) {
  if (done()) throw InvariantError("step called on a finished episode");
  ++steps_;
  synthdevice::StepOutcome out;
  out.done = done();
  out.observation.current.screen = {core::ScreenKind::Generic, -1, -1, -1, 0};
  out.observation.step_index = steps_;
  return out;
}

double throughput(int workers, double per_step_latency_ms, int horizon, int n_total) {
  const core::Task task{0, {1, 10}, 1, {0, -1, false}, core::Split::Train};
  auto factory = [horizon](const WorkerSpec&) { return std::make_unique<FixedLengthEnv>(horizon); };
  synthdevice::ActFn act = [](const core::Observation&, const core::Task&, core::Rng&) {
    return core::Action::press(core::Button::Back);
  };
  auto run = collect(act, 0, {task}, make_workers(workers, 0, per_step_latency_ms), n_total, factory);
  return run.traj_per_min();
}

}  // namespace digirl::farm
