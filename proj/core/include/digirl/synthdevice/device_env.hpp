#pragma once

#include <array>
#include <deque>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "digirl/synthdevice/environment.hpp"
#include "digirl/synthdevice/screen_graph.hpp"

namespace digirl::synthdevice {

struct EnvConfig {
  static constexpr std::int64_t kNoDrift = std::numeric_limits<std::int64_t>::max();

  double p_popup = 0.10;
  double p_loadfail = 0.05;
  bool shuffle_results = true;
  std::int64_t drift_period = 200;  ///< episodes per drift epoch
  double drift_magnitude = 0.2;     ///< fraction of widgets relocated per epoch
  int horizon = 20;
  std::uint64_t seed = 0;
  int grid = 8;

  void validate() const;
  /// Keys are the field names; unknown keys throw ConfigError.
  void apply(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_map() const;

  /// Same world with every stochastic knob off and drift frozen.
  EnvConfig deterministic() const;
};

using SlotRanks = std::array<int, kResultSlots>;

/// The part of the device state that determines what is on screen.
struct PageState {
  core::ScreenRef screen = ScreenGraph::home();  ///< page under any overlay
  bool overlay = false;
  int dismiss_cell = -1;
  int ad_cell = -1;
  std::vector<core::TokenId> typed;

  friend bool operator==(const PageState&, const PageState&) = default;
};

struct EnvState {
  PageState page;
  core::ScreenRef previous;  ///< kind None right after reset
  core::Task task;
  int steps_taken = 0;
  std::int64_t episode_counter = 0;
  std::int64_t epoch = 0;
  SlotRanks slot_rank{};  ///< rank displayed by each result slot this episode
  bool done = false;
  bool success = false;
  int load_failures = 0;
  int popups = 0;
};

/// Goal predicate: the goal page is on screen and no overlay covers it.
bool goal_holds(const PageState& page, const core::GoalSpec& goal);

/// Deterministic dynamics shared by the environment and the planner.
PageState apply_action(const ScreenGraph& graph, const Layout& layout, const SlotRanks& ranks,
                       const PageState& page, const core::Action& a);

/// Caption token drawn on a widget (the instruction word it answers to).
core::TokenId caption_of(int widget, int label);

core::ScreenView view_of(const ScreenGraph& graph, const Layout& layout, const SlotRanks& ranks,
                         const PageState& page);

/// Procedurally generated device with pop-ups, load failures, shuffled
/// search results and widget drift.
class DeviceEnv final : public Environment {
 public:
  DeviceEnv(std::shared_ptr<const ScreenGraph> graph, EnvConfig cfg);

  core::Observation reset(const core::Task& task) override;
  StepOutcome step(const core::Action& a, core::Rng& rng) override;
  bool done() const override { return state_.done; }
  int horizon() const override { return cfg_.horizon; }
  std::int64_t episode_counter() const override { return counter_; }
  void set_episode_counter(std::int64_t n) override { counter_ = n; }
  void set_episode_salt(std::uint64_t salt) override { salt_ = salt; }
  std::int64_t drift_epoch() const override { return epoch_for(counter_); }
  const EnvState* device_state() const override { return &state_; }

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  const ScreenGraph& graph() const { return *graph_; }
  std::shared_ptr<const ScreenGraph> graph_ptr() const { return graph_; }

  /// Layout in force for the current episode.
  const Layout& layout() const { return layout_for_epoch(state_.epoch); }
  const Layout& layout_for_epoch(std::int64_t epoch) const;
  std::int64_t epoch_for(std::int64_t counter) const;
  int moves_per_epoch() const;

  core::Observation observe() const;

 private:
  std::shared_ptr<const ScreenGraph> graph_;
  EnvConfig cfg_;
  EnvState state_;
  core::ScreenView prev_view_;
  std::int64_t counter_ = 0;
  std::uint64_t salt_ = 0;
  mutable std::deque<Layout> layouts_;  // cache, index = epoch; references stay valid
};

/// One line per step: `h=3 screen=results(site2,q5) a=Tap(4,1) r=0`.
std::string render_trace(const core::Trajectory& t);

}  // namespace digirl::synthdevice
