// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--config run.cfg] [--env-config env.cfg] [--only 1,4,9] [--strict] [--verbose]
//
// Exits 0 when every criterion ran, whatever the verdicts; --strict exits 1
// on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "chain_mdp.hpp"
#include "digirl/cli/experiment.hpp"
#include "digirl/core/kv.hpp"

using namespace digirl;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int prec = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << x;
  return os.str();
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1e", x);
  return buf;
}

double max_drawdown(const std::vector<double>& xs) {
  double peak = -1.0, dd = 0.0;
  for (double x : xs) {
    peak = std::max(peak, x);
    dd = std::max(dd, peak - x);
  }
  return dd;
}

// ---- 1: advantage oracle ---------------------------------------------------

double transcribed(const std::vector<double>& v, int h, double r_n, double lambda) {
  const int n = static_cast<int>(v.size());
  const double r_h = h == n ? r_n : 0.0;
  const double v_next = h == n ? 0.0 : v[static_cast<std::size_t>(h)];
  const double mc = std::pow(lambda, n - h) * r_n;
  return mc + (1.0 - mc) * (v_next + r_h - v[static_cast<std::size_t>(h - 1)]);
}

Verdict advantage_oracle() {
  values::ValueHead head(values::ValueKind::Step);
  core::Rng rng(17);
  std::normal_distribution<double> n(0.0, 0.7);
  for (std::uint32_t i = 0; i < head.dim(); ++i) head.weight(i) = n(rng);
  double worst = 0.0;
  int cases = 0;
  for (auto t : chain::all_trajectories()) {
    for (double r : {0.0, 1.0}) {
      t.final_reward = r;
      t.steps.back().reward = r;
      std::vector<double> v;
      for (const auto& s : t.steps) v.push_back(values::v_step(head, s.observation, t.task));
      for (double lambda : {0.0, 0.25, 0.5, 1.0}) {
        for (std::size_t h = 0; h < t.steps.size(); ++h) {
          const double a = algo::step_advantage(t, h, head, lambda, chain::kHorizon);
          worst = std::max(worst, std::abs(a - transcribed(v, static_cast<int>(h) + 1, r, lambda)));
          ++cases;
        }
      }
    }
  }
  return {worst <= 1e-12, "max |error| " + sci(worst) + " over " + std::to_string(cases) + " (trajectory, h, lambda, r)"};
}

// ---- 2: gradient checks ----------------------------------------------------

policy::FeatureVector random_phi(std::uint32_t dim, core::Rng& rng, int k) {
  std::vector<std::uint64_t> keys;
  for (int i = 0; i < k; ++i) keys.push_back(rng());
  return policy::hash_keys(keys, dim);
}

core::Action random_action(const core::ActionSpace& sp, core::Rng& rng) {
  switch (rng() % 3) {
    case 0: return core::Action::tap_cell(static_cast<int>(rng() % static_cast<unsigned>(sp.cells())), sp.grid);
    case 1: {
      std::vector<core::TokenId> toks(rng() % static_cast<unsigned>(sp.max_type_len + 1));
      for (auto& t : toks) t = 1 + static_cast<int>(rng() % static_cast<unsigned>(sp.vocab - 1));
      return core::Action::type(toks);
    }
    default: return core::Action::press(static_cast<core::Button>(rng() % 3));
  }
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

Verdict gradient_checks() {
  constexpr std::uint32_t dim = 128;
  const core::ActionSpace sp{3, 4, 2};
  core::Rng rng(21);
  std::normal_distribution<double> n(0.0, 0.5);
  double worst_pi = 0.0, worst_bce = 0.0, worst_mse = 0.0;
  for (int b = 0; b < 5; ++b) {
    policy::PolicySnapshot p(sp, dim);
    for (std::uint32_t f = 0; f < dim; ++f) {
      for (int c = 0; c < p.width(); ++c) p.weight(f, c) = n(rng);
    }
    std::vector<policy::Example> batch;
    for (int i = 0; i < 6; ++i) batch.push_back({random_phi(dim, rng, 4), random_action(sp, rng), 0.5 + 0.25 * i});
    const auto g = policy::nll_gradient(p, batch);

    values::ValueHead v(values::ValueKind::Step, dim);
    for (std::uint32_t i = 0; i < dim; ++i) v.weight(i) = n(rng);
    std::vector<values::ValueExample> vb;
    for (int i = 0; i < 12; ++i) vb.push_back({random_phi(dim, rng, 4), static_cast<double>(rng() % 2)});
    const auto gb = values::bce_gradient(v, vb);
    const auto gm = values::mse_gradient(v, vb);

    for (int k = 0; k < 10; ++k) {
      const auto fi = core::uniform_index(rng, g.features.size());
      const int col = static_cast<int>(core::uniform_index(rng, static_cast<std::size_t>(p.width())));
      const double eps = 1e-5;
      auto plus = p, minus = p;
      plus.weight(g.features[fi], col) += eps;
      minus.weight(g.features[fi], col) -= eps;
      const double num = (policy::mean_nll(plus, batch) - policy::mean_nll(minus, batch)) / (2 * eps);
      worst_pi = std::max(worst_pi, rel_err(g.rows[fi * static_cast<std::size_t>(g.width) + static_cast<std::size_t>(col)], num));

      const auto& ex = vb[core::uniform_index(rng, vb.size())].phi;
      const auto i = ex[core::uniform_index(rng, ex.size())];
      auto vp = v, vm = v;
      vp.weight(i) += 1e-6;
      vm.weight(i) -= 1e-6;
      worst_bce = std::max(worst_bce, rel_err(gb[i], (values::bce_loss(vp, vb) - values::bce_loss(vm, vb)) / 2e-6));
      worst_mse = std::max(worst_mse, rel_err(gm[i], (values::mse_loss(vp, vb) - values::mse_loss(vm, vb)) / 2e-6));
    }
  }
  const bool ok = worst_pi < 1e-4 && worst_bce < 1e-4 && worst_mse < 1e-4;
  return {ok, "max relative error: policy " + sci(worst_pi) + ", bce " + sci(worst_bce) + ", mse " + sci(worst_mse)};
}

// ---- 3: value calibration --------------------------------------------------

Verdict value_calibration() {
  constexpr int tasks = 40, per_task = 50;
  core::Rng rng(7);
  std::vector<values::ValueExample> batch;
  std::vector<core::Task> ts;
  std::vector<double> empirical;
  for (int k = 0; k < tasks; ++k) {
    core::Task t;
    t.id = k;
    t.instruction = {1, 10 + k % 5, 21 + k};
    const double p = 0.05 + 0.9 * core::uniform01(rng);
    int wins = 0;
    for (int i = 0; i < per_task; ++i) {
      const double r = core::bernoulli(rng, p) ? 1.0 : 0.0;
      wins += r > 0.5;
      batch.push_back({policy::instruction_features(t), r});
    }
    ts.push_back(t);
    empirical.push_back(static_cast<double>(wins) / per_task);
  }
  values::ValueHead h(values::ValueKind::Instruct);
  for (int i = 0; i < 100; ++i) h = values::bce_update(std::move(h), batch, 50.0, 1e9);
  int within = 0;
  double worst = 0.0;
  for (int k = 0; k < tasks; ++k) {
    const double e = std::abs(values::v_instruct(h, ts[static_cast<std::size_t>(k)]) - empirical[static_cast<std::size_t>(k)]);
    within += e <= 0.05;
    worst = std::max(worst, e);
  }
  const double frac = static_cast<double>(within) / tasks;
  return {frac >= 0.9, std::to_string(within) + "/" + std::to_string(tasks) + " tasks within 0.05 (worst " + fmt(worst, 4) +
                           ") on " + std::to_string(batch.size()) + " trajectories"};
}

// ---- 10: filter properties -------------------------------------------------

Verdict filter_properties() {
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  core::Rng rng(5);
  int trials = 0;
  for (int trial = 0; trial < 200; ++trial, ++trials) {
    const std::size_t n = 1 + core::uniform_index(rng, 80);
    std::vector<core::TrajectoryPtr> snap;
    values::ValueHead v(values::ValueKind::Instruct);
    for (std::size_t i = 0; i < n; ++i) {
      auto t = chain::rollout({core::bernoulli(rng, 0.5), true, core::bernoulli(rng, 0.5)});
      t.task.id = static_cast<int>(core::uniform_index(rng, 6));
      t.task.instruction = {1, 10 + t.task.id};
      snap.push_back(std::make_shared<const core::Trajectory>(t));
    }
    for (std::uint32_t i = 0; i < v.dim(); ++i) v.weight(i) = core::uniform01(rng) * 4 - 2;
    std::set<const core::Trajectory*> prev;
    for (double p : {0.05, 0.1, 0.25, 0.5, 1.0}) {
      const auto kept = algo::curriculum_filter(snap, v, p);
      const auto want = static_cast<std::size_t>(std::max(1.0, std::ceil(p * static_cast<double>(n) - 1e-9)));
      expect(kept.size() == want, "count");
      std::set<const core::Trajectory*> cur;
      for (const auto& t : kept) cur.insert(t.get());
      expect(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()), "nesting");
      double min_kept = 1e9;
      for (const auto& t : kept) min_kept = std::min(min_kept, algo::instruct_advantage(*t, v));
      for (const auto& t : snap) {
        if (!cur.count(t.get())) expect(algo::instruct_advantage(*t, v) <= min_kept, "sort oracle");
      }
      prev = cur;
    }
  }
  for (int H : {3, 10, 20}) {
    expect(!algo::step_filter(1.0 / H, H), "step filter keeps A = 1/H");
    expect(algo::step_filter(std::nextafter(1.0 / H, 2.0), H), "step filter drops A just above 1/H");
  }
  const std::vector<double> v{0.2, 0.45, 0.7, 0.9};
  const auto a0 = algo::step_advantages(v, 1.0, 0.0);
  for (std::size_t h = 0; h + 1 < v.size(); ++h) expect(std::abs(a0[h] - (v[h + 1] - v[h])) < 1e-15, "lambda=0 limit");
  for (double x : algo::step_advantages(v, 1.0, 1.0)) expect(x == 1.0, "lambda=1 limit");
  std::string detail = std::to_string(trials) + " random buffers x 5 fractions, boundary and limit checks";
  if (!bad.empty()) detail += "; violated: " + bad.front() + " (" + std::to_string(bad.size()) + " total)";
  return {bad.empty(), detail};
}

// ---- training-based criteria -----------------------------------------------

struct Runs {
  cli::ExperimentSpec base;
  std::map<std::string, std::vector<cli::RunResult>> cache;

  const std::vector<cli::RunResult>& get(const std::string& key, cli::Recipe recipe, const algo::AlgoVariant& v,
                                         const std::vector<std::uint64_t>& seeds,
                                         const std::function<void(cli::ExperimentSpec&)>& tweak = {}) {
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto spec = base;
    spec.recipe = recipe;
    spec.seeds = seeds;
    if (tweak) tweak(spec);
    spec.validate();
    std::vector<cli::RunResult> out;
    for (auto s : seeds) out.push_back(cli::run_one(spec, v, s));
    return cache[key] = std::move(out);
  }
};

std::vector<const cli::RunResult*> ptrs(const std::vector<cli::RunResult>& rs) {
  std::vector<const cli::RunResult*> out;
  for (const auto& r : rs) out.push_back(&r);
  return out;
}

double mean_of(const std::vector<cli::RunResult>& rs, double cli::RunResult::*field) {
  std::vector<double> xs;
  for (const auto& r : rs) xs.push_back(r.*field);
  return cli::mean(xs);
}

std::string pct(double x) { return fmt(100 * x, 1); }

const std::vector<std::uint64_t> kSeeds3{1, 2, 3};
const std::vector<std::uint64_t> kSeeds2{1, 2};

Verdict method_ordering(Runs& R) {
  const auto& dg = R.get("digirl", cli::Recipe::OffToOn, {}, kSeeds3);
  const auto& fb = R.get("filtered_bc", cli::Recipe::OffToOn, {algo::AlgoVariant::FilteredBC}, kSeeds3);
  const double d = mean_of(dg, &cli::RunResult::test_success);
  const double f = mean_of(fb, &cli::RunResult::test_success);
  const double b = mean_of(dg, &cli::RunResult::bc_test_final);
  const double b0 = mean_of(dg, &cli::RunResult::bc_test_initial);
  return {d - f >= 0.05 && f - b >= 0.10, "DigiRL " + pct(d) + " / FilteredBC " + pct(f) + " / BC-on-demos " + pct(b) +
                                              " (at clock 0: " + pct(b0) + ")"};
}

Verdict offline_vs_online(Runs& R) {
  const auto& dg = R.get("digirl", cli::Recipe::OffToOn, {}, kSeeds3);
  const auto& off = R.get("offline", cli::Recipe::Offline, {}, kSeeds3);
  const double d = mean_of(dg, &cli::RunResult::test_success);
  const double o = mean_of(off, &cli::RunResult::test_success);
  std::vector<double> budget;
  for (const auto& r : off) budget.push_back(static_cast<double>(r.trajectories));
  return {d - o >= 0.05, "off-to-on " + pct(d) + " vs offline " + pct(o) + " (offline budget " +
                             fmt(cli::mean(budget), 0) + " trajectories)"};
}

Verdict ablations(Runs& R) {
  const auto& dg = R.get("digirl", cli::Recipe::OffToOn, {}, kSeeds3);
  const auto& fb = R.get("filtered_bc", cli::Recipe::OffToOn, {algo::AlgoVariant::FilteredBC}, kSeeds3);
  const auto& ns = R.get("no_step", cli::Recipe::OffToOn, {algo::AlgoVariant::NoStepAdvantage}, kSeeds3);
  const auto& rv = R.get("regression", cli::Recipe::OffToOn, {algo::AlgoVariant::RegressionValues}, kSeeds3);
  const double threshold = mean_of(fb, &cli::RunResult::test_success);
  auto itt = [&](const std::vector<cli::RunResult>& rs) {
    return cli::iterations_to_threshold(cli::mean_test_curve(ptrs(rs)), threshold);
  };
  const auto i_dg = itt(dg), i_ns = itt(ns), i_fb = itt(fb);
  auto show = [](std::optional<int> i) { return i ? std::to_string(*i) : std::string("never"); };
  constexpr int kNever = 1 << 30;
  const int a = i_dg.value_or(kNever), b = i_ns.value_or(kNever), c = i_fb.value_or(kNever);
  const bool order = i_dg && a < b && b < c;

  const double d = mean_of(dg, &cli::RunResult::test_success);
  const double reg = mean_of(rv, &cli::RunResult::test_success);
  double best_awr = -1.0, best_beta = 0.0;
  for (double beta : {0.05, 0.1, 0.5}) {
    const auto& aw = R.get("awr" + fmt(beta, 2), cli::Recipe::OffToOn, algo::AlgoVariant::vanilla_awr(beta), kSeeds3);
    const double m = mean_of(aw, &cli::RunResult::test_success);
    if (m > best_awr) best_awr = m, best_beta = beta;
  }
  const bool reg_ok = reg <= d - 0.05;
  const bool awr_ok = std::abs(best_awr - d) <= 0.05;
  return {order && reg_ok && awr_ok,
          "iterations to " + pct(threshold) + ": DigiRL " + show(i_dg) + ", NoStepAdvantage " + show(i_ns) +
              ", FilteredBC " + show(i_fb) + (order ? "" : " [order]") + "; RegressionValues " + pct(reg) + " vs " +
              pct(d) + (reg_ok ? "" : " [regression]") + "; VanillaAWR(beta " + fmt(best_beta, 2) + ") " +
              pct(best_awr) + (awr_ok ? "" : " [awr]")};
}

Verdict drift(Runs& R) {
  const auto& rs = R.get("drift", cli::Recipe::FrozenVsContinual, {}, kSeeds2);
  const auto curve = cli::mean_drift(ptrs(rs));
  std::vector<double> fr, co;
  std::string pts;
  for (const auto& p : curve) {
    fr.push_back(p.frozen);
    co.push_back(p.continual);
    pts += (pts.empty() ? "" : " ") + fmt(p.frozen, 2) + "/" + fmt(p.continual, 2);
  }
  const double dfr = max_drawdown(fr), dco = max_drawdown(co);
  return {dfr >= 0.10 && dco <= 0.05, "drawdown frozen " + pct(dfr) + ", continual " + pct(dco) +
                                          "; frozen/continual per epoch: " + pts};
}

Verdict noise(Runs& R) {
  R.get("digirl", cli::Recipe::OffToOn, {}, kSeeds3);
  const auto& clean = R.cache.at("digirl");
  const std::vector<cli::RunResult> clean2(clean.begin(), clean.begin() + 2);
  const auto& noisy = R.get("noisy", cli::Recipe::OffToOn, {}, kSeeds2,
                            [](cli::ExperimentSpec& s) { s.run.reward_noise = 0.028; });
  const double c = mean_of(clean2, &cli::RunResult::test_success);
  const double n = mean_of(noisy, &cli::RunResult::test_success);
  std::string per_seed;
  for (std::size_t i = 0; i < 2; ++i) {
    per_seed += (i ? ", " : "") + pct(clean2[i].test_success) + "/" + pct(noisy[i].test_success);
  }
  return {std::abs(c - n) <= 0.05, "eps=0 " + pct(c) + " vs eps=0.028 " + pct(n) + " (per seed " + per_seed + ")"};
}

Verdict farm_scaling(Runs& R) {
  auto spec = R.base;
  spec.recipe = cli::Recipe::BenchScaling;
  spec.out_dir.clear();
  spec.seeds = {1};
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = cli::run_bench_scaling(spec);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double s8 = 0.0;
  for (const auto& p : res.scaling) {
    if (p.workers == 8) s8 = p.speedup;
  }
  const double valid = res.faults ? res.faults->validity_rate() : 0.0;
  const bool ok = s8 >= 6.0 && valid == 1.0 && wall < 10.0;
  return {ok, "8-worker speedup x" + fmt(s8, 2) + ", validity " + pct(valid) + "% over " +
                  std::to_string(res.faults ? res.faults->aggregated : 0) + " trajectories with " +
                  std::to_string(res.faults ? res.faults->recoverable_resets : 0) + " resets, " + fmt(wall, 2) + " s wall"};
}

Verdict failure_shift(Runs& R) {
  const auto& dg = R.get("digirl", cli::Recipe::OffToOn, {}, kSeeds3);
  evaluator::FailureHistogram bc, rl;
  for (const auto& r : dg) {
    for (auto m : evaluator::kFailureModes) {
      for (int i = 0; i < r.bc_failures.count(m); ++i) bc.add(m);
      for (int i = 0; i < r.failures.count(m); ++i) rl.add(m);
    }
  }
  const double b = bc.fraction(evaluator::FailureMode::FailToRecover);
  const double d = rl.fraction(evaluator::FailureMode::FailToRecover);
  return {b - d >= 0.15, "FailToRecover share of failures: BC " + pct(b) + "% (" + std::to_string(bc.failed()) +
                             " failures) -> DigiRL " + pct(d) + "% (" + std::to_string(rl.failed()) + " failures)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string run_cfg, env_cfg;
  std::vector<int> only;
  bool strict = false, verbose = false;
  app.add_option("--config", run_cfg, "run config file (key = value)");
  app.add_option("--env-config", env_cfg, "environment config file");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  app.add_flag("--verbose", verbose, "training progress on stderr");
  CLI11_PARSE(app, argc, argv);

  Runs R;
  try {
    if (!run_cfg.empty()) R.base.run.apply(core::read_kv_file(run_cfg));
    R.base.env.horizon = R.base.run.horizon;
    if (!env_cfg.empty()) R.base.env.apply(core::read_kv_file(env_cfg));
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << "\n";
    return 2;
  }
  if (verbose) R.base.log = &std::cerr;

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"advantage oracle", advantage_oracle},
      {"gradient checks", gradient_checks},
      {"value calibration", value_calibration},
      {"method ordering", [&] { return method_ordering(R); }},
      {"off-to-on beats offline", [&] { return offline_vs_online(R); }},
      {"ablations", [&] { return ablations(R); }},
      {"non-stationarity", [&] { return drift(R); }},
      {"evaluator-noise robustness", [&] { return noise(R); }},
      {"farm scaling", [&] { return farm_scaling(R); }},
      {"filter correctness", filter_properties},
      {"failure-mode shift", [&] { return failure_shift(R); }},
  };

  int failed = 0, errors = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
      ++errors;
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << v.detail << " ["
              << fmt(s, 1) << " s]" << std::endl;
  }
  if (errors) return 2;
  return strict && failed ? 1 : 0;
}
