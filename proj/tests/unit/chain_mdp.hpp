#pragma once

// Three-state chain used by the advantage oracle and the tabular learning
// test. States 0 -> 1 -> 2; a tap advances, anything else falls back to 0.
// Reaching state 2 pays 1 and ends the episode; the horizon is 3.

#include <vector>

#include "digirl/core/types.hpp"
#include "digirl/core/vocab.hpp"
#include "digirl/synthdevice/environment.hpp"

namespace chain {

using namespace digirl;

inline constexpr int kStates = 3;
inline constexpr int kHorizon = 3;

inline core::ActionSpace space() { return {1, 2, 1}; }

inline core::Task task() {
  core::Task t;
  t.id = 7;
  t.instruction = {core::vocab::kGoTo, core::vocab::site_token(0)};
  t.difficulty = 1;
  t.goal = {0, -1, false};
  return t;
}

inline core::ScreenView view(int s) {
  core::ScreenView v;
  v.screen.kind = core::ScreenKind::Generic;
  v.screen.index = s;
  v.widgets = {{0, 0, -1, 0}};
  return v;
}

inline bool advances(const core::Action& a) { return a.kind() == core::ActionKind::Tap; }

class Env final : public synthdevice::Environment {
 public:
  core::Observation reset(const core::Task&) override {
    s_ = 0;
    h_ = 0;
    prev_ = core::ScreenView{};
    ++counter_;
    return obs();
  }
  synthdevice::StepOutcome step(const core::Action& a, core::Rng&) override {
    prev_ = view(s_);
    s_ = advances(a) ? s_ + 1 : 0;
    ++h_;
    synthdevice::StepOutcome out;
    out.reward = s_ == kStates - 1 ? 1.0 : 0.0;
    out.done = done();
    out.observation = obs();
    return out;
  }
  bool done() const override { return s_ == kStates - 1 || h_ >= kHorizon; }
  int horizon() const override { return kHorizon; }
  std::int64_t episode_counter() const override { return counter_; }
  void set_episode_counter(std::int64_t n) override { counter_ = n; }
  std::int64_t drift_epoch() const override { return 0; }

 private:
  core::Observation obs() const { return {view(s_), prev_, h_}; }
  int s_ = 0;
  int h_ = 0;
  core::ScreenView prev_;
  std::int64_t counter_ = 0;
};

/// Deterministic trajectory for a fixed sequence of advance/reset choices.
inline core::Trajectory rollout(const std::vector<bool>& taps) {
  Env env;
  core::Rng rng(1);
  core::Trajectory t;
  t.task = task();
  auto o = env.reset(t.task);
  for (std::size_t h = 0; h < taps.size() && !env.done(); ++h) {
    core::Step s;
    s.observation = o;
    s.action = taps[h] ? core::Action::tap(0, 0) : core::Action::press(core::Button::Back);
    auto out = env.step(s.action, rng);
    s.reward = out.reward;
    s.done = out.done;
    o = out.observation;
    t.steps.push_back(s);
  }
  t.final_reward = t.steps.back().reward;
  return t;
}

/// Every trajectory the chain can produce (all 2^3 choice sequences,
/// deduplicated by early termination).
inline std::vector<core::Trajectory> all_trajectories() {
  std::vector<core::Trajectory> out;
  for (int bits = 0; bits < (1 << kHorizon); ++bits) {
    std::vector<bool> taps;
    for (int h = 0; h < kHorizon; ++h) taps.push_back(((bits >> h) & 1) != 0);
    auto t = rollout(taps);
    bool seen = false;
    for (const auto& u : out) seen = seen || u == t;
    if (!seen) out.push_back(t);
  }
  return out;
}

}  // namespace chain
