#include "digirl/algo/trainer.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "digirl/core/error.hpp"

namespace digirl::algo {

using core::TrajectoryPtr;

Agent Agent::fresh(const core::ActionSpace& space, std::uint32_t dim) {
  return Agent{policy::PolicySnapshot(space, dim), values::ValueHead(values::ValueKind::Step, dim),
               values::ValueHead(values::ValueKind::Instruct, dim)};
}

const FeatureCache::Entry& FeatureCache::get(const TrajectoryPtr& t) {
  auto it = entries_.find(t.get());
  // an expired owner means the address was reused by a new trajectory
  if (it != entries_.end() && it->second.owner.lock() == t) return it->second;
  Entry e;
  e.owner = t;
  e.state.reserve(t->steps.size());
  e.value.reserve(t->steps.size());
  for (const auto& s : t->steps) {
    e.state.push_back(policy::featurize(s.observation, t->task, dim_));
    if (value_uses_action_) {
      e.value.push_back(values::step_features(s.observation, t->task, &s.action, grid_, dim_));
    } else {
      e.value.push_back(e.state.back());
    }
  }
  e.instruction = policy::instruction_features(t->task, dim_);
  return entries_[t.get()] = std::move(e);
}

void FeatureCache::prune() {
  std::erase_if(entries_, [](const auto& kv) { return kv.second.owner.expired(); });
}

namespace {

bool uses_step_filter(const AlgoVariant& v) {
  return v.kind == AlgoVariant::DigiRL || v.kind == AlgoVariant::RegressionValues;
}

template <typename T>
std::vector<T> minibatch(const std::vector<T>& all, int batch_size, core::Rng& rng) {
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) out.push_back(all[core::uniform_index(rng, all.size())]);
  return out;
}

}  // namespace

ActorSet select_actor_data(const AlgoVariant& variant, const std::vector<TrajectoryPtr>& buffer, const Agent& agent,
                           const core::RunConfig& cfg, Mode mode, FeatureCache& cache) {
  ActorSet out;
  if (buffer.empty()) return out;
  double sum_a = 0.0;
  for (const auto& t : buffer) {
    sum_a += t->final_reward - agent.v_instruct.value(cache.get(t).instruction);
    out.candidate_steps += t->steps.size();
  }
  out.mean_a_instruct = sum_a / static_cast<double>(buffer.size());

  // trajectory level
  std::vector<TrajectoryPtr> selected;
  if (variant.kind == AlgoVariant::FilteredBC || mode == Mode::Offline) {
    for (const auto& t : buffer) {
      if (t->succeeded()) selected.push_back(t);
    }
  } else {
    selected = curriculum_filter(buffer, agent.v_instruct, cfg.top_p_fraction);
  }
  out.selected_trajectories = selected.size();

  // step level
  std::vector<double> awr_adv;
  for (const auto& t : selected) {
    const auto& f = cache.get(t);
    if (variant.kind == AlgoVariant::FilteredBC || variant.kind == AlgoVariant::NoStepAdvantage) {
      if (!t->succeeded()) continue;
      for (std::size_t h = 0; h < t->steps.size(); ++h) out.examples.push_back({f.state[h], t->steps[h].action, 1.0});
      continue;
    }
    std::vector<double> v;
    v.reserve(t->steps.size());
    for (const auto& phi : f.value) v.push_back(agent.v_step.value(phi));
    const auto adv = step_advantages(v, t->final_reward, cfg.gae_lambda, cfg.literal_mixing);
    for (std::size_t h = 0; h < t->steps.size(); ++h) {
      if (uses_step_filter(variant) && !step_filter(adv[h], cfg.horizon)) continue;
      out.examples.push_back({f.state[h], t->steps[h].action, 1.0});
      if (variant.kind == AlgoVariant::VanillaAWR) awr_adv.push_back(adv[h]);
    }
  }
  if (variant.kind == AlgoVariant::VanillaAWR && !out.examples.empty()) {
    // weights average to one so the step size matches the other variants
    const auto w = awr_weights(awr_adv, variant.beta);
    for (std::size_t i = 0; i < w.size(); ++i) out.examples[i].weight = w[i] * static_cast<double>(w.size());
  }
  return out;
}

IterationMetrics train_step(const AlgoVariant& variant, const std::vector<TrajectoryPtr>& buffer, Agent& agent,
                            const core::RunConfig& cfg, core::Rng& rng, const TrainOptions& opt, FeatureCache& cache) {
  variant.validate();
  if (buffer.empty()) throw InvariantError("training on an empty buffer");
  IterationMetrics m;
  m.buffer_size = buffer.size();
  const bool mse = variant.kind == AlgoVariant::RegressionValues;
  auto update = [&](values::ValueHead h, const std::vector<values::ValueExample>& b, double lr) {
    return mse ? values::mse_update(std::move(h), b, lr, cfg.value_max_grad_norm)
               : values::bce_update(std::move(h), b, lr, cfg.value_max_grad_norm);
  };
  auto fit = [&](values::ValueHead& h, const std::vector<values::ValueExample>& all, int n, double lr) {
    const bool full = cfg.value_batch_size <= 0 || static_cast<std::size_t>(cfg.value_batch_size) >= all.size();
    for (int u = 0; u < n; ++u) {
      h = full ? update(std::move(h), all, lr) : update(std::move(h), minibatch(all, cfg.value_batch_size, rng), lr);
    }
  };
  auto loss = [&](const values::ValueHead& h, const std::vector<values::ValueExample>& b) {
    return mse ? values::mse_loss(h, b) : values::bce_loss(h, b);
  };

  // 1. instruction value on the unfiltered buffer
  std::vector<values::ValueExample> instr;
  instr.reserve(buffer.size());
  for (const auto& t : buffer) instr.push_back({cache.get(t).instruction, t->final_reward});
  fit(agent.v_instruct, instr, opt.instruct_updates, cfg.instruct_value_lr);
  m.instruct_loss = loss(agent.v_instruct, instr);

  // 2. step value, Monte-Carlo targets
  std::vector<values::ValueExample> steps;
  for (const auto& t : buffer) {
    for (const auto& phi : cache.get(t).value) steps.push_back({phi, t->final_reward});
  }
  fit(agent.v_step, steps, opt.value_updates, cfg.value_lr);
  m.step_loss = loss(agent.v_step, steps);

  // 3-4. filters
  auto data = select_actor_data(variant, buffer, agent, cfg, opt.mode, cache);
  m.selected_trajectories = data.selected_trajectories;
  m.candidate_steps = data.candidate_steps;
  m.kept_steps = data.examples.size();
  m.filtered_fraction = m.candidate_steps ? static_cast<double>(m.kept_steps) / m.candidate_steps : 0.0;
  m.mean_a_instruct = data.mean_a_instruct;

  // 5. actor
  if (data.examples.empty()) {
    m.actor_skipped = true;
    return m;
  }
  std::vector<policy::Example> batch;
  for (int u = 0; u < opt.actor_updates; ++u) {
    batch.clear();
    for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(data.examples[core::uniform_index(rng, data.examples.size())]);
    policy::UpdateStats st;
    agent.policy = policy::mle_update(std::move(agent.policy), batch, cfg.actor_lr, cfg.max_grad_norm, &st);
    m.actor_loss = st.loss;
    ++m.actor_updates;
  }
  return m;
}

IterationMetrics train_iteration(const AlgoVariant& variant, const core::ReplayBuffer& buffer, Agent& agent,
                                 const core::RunConfig& cfg, core::Rng& rng, FeatureCache& cache, Mode mode) {
  TrainOptions opt{cfg.instruct_updates_per_iter, cfg.value_updates_per_iter, cfg.actor_updates_per_iter, mode};
  return train_step(variant, buffer.snapshot(), agent, cfg, rng, opt, cache);
}

Agent run_offline(const AlgoVariant& variant, const std::vector<core::Trajectory>& data, const core::RunConfig& cfg,
                  Agent agent, core::Rng& rng, IterationMetrics* last) {
  if (data.empty()) throw InvariantError("offline training needs data");
  std::vector<TrajectoryPtr> buffer;
  buffer.reserve(data.size());
  for (const auto& t : data) {
    if (auto err = core::validate(t, cfg.horizon); !err.empty()) throw InvariantError("offline data: " + err);
    buffer.push_back(std::make_shared<const core::Trajectory>(t));
  }
  FeatureCache cache(agent.policy.dim(), cfg.value_uses_action, agent.policy.space().grid);
  TrainOptions opt{cfg.offline_instruct_iters * cfg.instruct_updates_per_iter,
                   cfg.offline_value_iters * cfg.value_updates_per_iter,
                   cfg.offline_actor_iters * cfg.actor_updates_per_iter, Mode::Offline};
  auto m = train_step(variant, buffer, agent, cfg, rng, opt, cache);
  if (last) *last = m;
  return agent;
}

void write_curve_header(std::ostream& os) {
  os << "iteration,n_traj,train_success,test_success,mean_A_instruct,filtered_fraction\n";
}

void write_curve_row(std::ostream& os, const CurveRow& r) {
  os << r.iteration << ',' << r.n_traj << ',' << r.train_success << ',';
  if (r.test_success) os << *r.test_success;
  os << ',' << r.mean_a_instruct << ',' << r.filtered_fraction << '\n';
}

std::vector<CurveRow> read_curve(std::istream& is) {
  std::vector<CurveRow> out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 6) throw InvariantError("malformed learning-curve row: " + line);
    CurveRow r;
    r.iteration = std::stoi(f[0]);
    r.n_traj = std::stoll(f[1]);
    r.train_success = std::stod(f[2]);
    if (!f[3].empty()) r.test_success = std::stod(f[3]);
    r.mean_a_instruct = std::stod(f[4]);
    r.filtered_fraction = std::stod(f[5]);
    out.push_back(r);
  }
  return out;
}

void run_online(const AlgoVariant& variant, OnlineState& state, const OnlineHooks& hooks, const core::RunConfig& cfg,
                int n_iterations) {
  if (!hooks.collect) throw InvariantError("online training needs a collector");
  FeatureCache cache(state.agent.policy.dim(), cfg.value_uses_action, state.agent.policy.space().grid);
  for (int it = state.iteration + 1; it <= n_iterations; ++it) {
    auto batch = hooks.collect(state.agent.policy, cfg.rollouts_per_iter, it);
    for (auto& t : batch.trajectories) state.buffer.push(std::move(t));
    state.n_traj += static_cast<std::int64_t>(batch.trajectories.size());

    CurveRow row;
    row.iteration = it;
    row.n_traj = state.n_traj;
    row.train_success = batch.true_success;
    if (hooks.train) {
      cache.prune();
      auto m = train_iteration(variant, state.buffer, state.agent, cfg, state.rng, cache, Mode::Online);
      row.mean_a_instruct = m.mean_a_instruct;
      row.filtered_fraction = m.filtered_fraction;
    }
    if (hooks.evaluate && (it % cfg.eval_every == 0 || it == n_iterations)) {
      row.test_success = hooks.evaluate(state.agent, it);
    }
    state.curve.push_back(row);
    state.iteration = it;
    if (hooks.after_iteration) hooks.after_iteration(it);
  }
}

}  // namespace digirl::algo
