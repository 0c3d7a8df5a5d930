#include "digirl/synthdevice/device_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "digirl/core/error.hpp"
#include "digirl/core/kv.hpp"
#include "digirl/core/vocab.hpp"

namespace digirl::synthdevice {

using core::Action;
using core::ActionKind;
using core::Button;
using core::ScreenKind;
using core::ScreenRef;

namespace {

constexpr std::size_t kMaxTyped = 16;

template <typename Fn>
void for_each_field(EnvConfig& c, Fn&& fn) {
  fn("p_popup", c.p_popup);
  fn("p_loadfail", c.p_loadfail);
  fn("shuffle_results", c.shuffle_results);
  fn("drift_period", c.drift_period);
  fn("drift_magnitude", c.drift_magnitude);
  fn("horizon", c.horizon);
  fn("seed", c.seed);
  fn("grid", c.grid);
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string("field '") + field + "': " + what);
}

PageState navigate(const ScreenRef& to) {
  PageState next;
  next.screen = to;
  return next;
}

}  // namespace

core::TokenId caption_of(int widget, int label) {
  namespace v = core::vocab;
  switch (widget_family(widget)) {
    case WidgetFamily::BrowserIcon: return v::kGoTo;
    case WidgetFamily::SiteLink: return v::site_token(widget_index(widget));
    case WidgetFamily::SearchBar: return v::kSearchFor;
    case WidgetFamily::ResultSlot: return label == 0 ? v::kSelectFirst : 0;
    default: return 0;
  }
}

void EnvConfig::validate() const {
  require(p_popup >= 0 && p_popup <= 1, "p_popup", "must lie in [0, 1]");
  require(p_loadfail >= 0 && p_loadfail <= 1, "p_loadfail", "must lie in [0, 1]");
  require(drift_period >= 1, "drift_period", "must be at least 1");
  require(drift_magnitude >= 0 && drift_magnitude <= 1, "drift_magnitude", "must lie in [0, 1]");
  require(horizon >= 1, "horizon", "must be positive");
  require(grid >= 3, "grid", "must be at least 3");
}

void EnvConfig::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    bool found = false;
    for_each_field(*this, [&](const char* name, auto& field) {
      if (key != name) return;
      found = true;
      if (key == "drift_period" && (value == "inf" || value == "none")) {
        drift_period = kNoDrift;
        return;
      }
      core::parse_field(key, value, field);
    });
    if (!found) throw ConfigError("unknown env config field '" + key + "'");
  }
}

std::map<std::string, std::string> EnvConfig::to_map() const {
  std::map<std::string, std::string> out;
  auto copy = *this;
  for_each_field(copy, [&](const char* name, auto& field) { out[name] = core::format_field(field); });
  if (drift_period == kNoDrift) out["drift_period"] = "inf";
  return out;
}

EnvConfig EnvConfig::deterministic() const {
  auto c = *this;
  c.p_popup = 0.0;
  c.p_loadfail = 0.0;
  c.drift_period = kNoDrift;
  return c;
}

bool goal_holds(const PageState& page, const core::GoalSpec& goal) {
  if (page.overlay) return false;
  const auto& s = page.screen;
  if (s.site != goal.site) return false;
  if (goal.select_first) {
    return s.kind == ScreenKind::Detail && s.query == goal.query && s.rank == 0;
  }
  if (goal.query >= 0) return s.kind == ScreenKind::Results && s.query == goal.query;
  return s.kind == ScreenKind::Landing;
}

PageState apply_action(const ScreenGraph& graph, const Layout& layout, const SlotRanks& ranks,
                       const PageState& page, const Action& a) {
  if (page.overlay) {
    PageState next = page;
    switch (a.kind()) {
      case ActionKind::Press:
        if (a.as_press().button == Button::Back) next.overlay = false;
        if (a.as_press().button == Button::Home) return navigate(ScreenGraph::home());
        break;
      case ActionKind::Tap: {
        const int cell = a.cell(layout.grid);
        if (cell == page.dismiss_cell) next.overlay = false;
        if (cell == page.ad_cell) return navigate({ScreenKind::AdPage, page.screen.site});
        break;
      }
      case ActionKind::Type:
        break;
    }
    if (!next.overlay) {
      next.dismiss_cell = -1;
      next.ad_cell = -1;
    }
    return next;
  }

  const auto& s = page.screen;
  switch (a.kind()) {
    case ActionKind::Press:
      switch (a.as_press().button) {
        case Button::Home:
          return navigate(ScreenGraph::home());
        case Button::Back: {
          const auto to = graph.back_target(s);
          return to == s ? page : navigate(to);
        }
        case Button::Enter:
          if (s.kind != ScreenKind::Search) return page;
          return navigate({ScreenKind::Results, s.site, graph.catalog().lookup(page.typed)});
      }
      return page;
    case ActionKind::Type: {
      if (s.kind != ScreenKind::Search) return page;
      PageState next = page;
      for (auto t : a.as_type().tokens) {
        if (next.typed.size() < kMaxTyped) next.typed.push_back(t);
      }
      return next;
    }
    case ActionKind::Tap: {
      const int unit = graph.unit_of(s);
      if (unit < 0) return page;
      const int slot = layout.slot_at(unit, a.cell(layout.grid));
      if (slot < 0) return page;
      const int widget = graph.units()[static_cast<std::size_t>(unit)].widgets[static_cast<std::size_t>(slot)];
      switch (widget_family(widget)) {
        case WidgetFamily::ClearButton: {
          PageState next = page;
          next.typed.clear();
          return next;
        }
        case WidgetFamily::ResultSlot:
          return navigate({ScreenKind::Detail, s.site, s.query,
                                 ranks[static_cast<std::size_t>(widget_index(widget))]});
        default:
          if (auto to = graph.target(s, widget)) return navigate(*to);
          return page;
      }
    }
  }
  return page;
}

core::ScreenView view_of(const ScreenGraph& graph, const Layout& layout, const SlotRanks& ranks,
                         const PageState& page) {
  core::ScreenView v;
  if (page.overlay) {
    v.screen = {ScreenKind::Overlay};
    v.widgets = {{widget_id(WidgetFamily::Dismiss), page.dismiss_cell, -1},
                 {widget_id(WidgetFamily::OverlayAd), page.ad_cell, -1}};
    return v;
  }
  v.screen = page.screen;
  const int unit = graph.unit_of(page.screen);
  if (unit >= 0) {
    const auto& widgets = graph.units()[static_cast<std::size_t>(unit)].widgets;
    for (std::size_t k = 0; k < widgets.size(); ++k) {
      int label = -1;
      if (widget_family(widgets[k]) == WidgetFamily::ResultSlot) {
        label = ranks[static_cast<std::size_t>(widget_index(widgets[k]))];
      }
      v.widgets.push_back({widgets[k], layout.cell_of(unit, static_cast<int>(k)), label, caption_of(widgets[k], label)});
    }
  }
  if (page.screen.kind == ScreenKind::Search) v.typed = page.typed;
  return v;
}

DeviceEnv::DeviceEnv(std::shared_ptr<const ScreenGraph> graph, EnvConfig cfg)
    : graph_(std::move(graph)), cfg_(cfg) {
  if (!graph_) throw InvariantError("DeviceEnv needs a screen graph");
  cfg_.validate();
  if (cfg_.grid != graph_->grid()) throw InvariantError("env grid differs from screen graph grid");
  layouts_.push_back(graph_->base_layout());
}

std::int64_t DeviceEnv::epoch_for(std::int64_t counter) const {
  if (cfg_.drift_period == EnvConfig::kNoDrift) return 0;
  return counter / cfg_.drift_period;
}

int DeviceEnv::moves_per_epoch() const {
  return static_cast<int>(std::lround(cfg_.drift_magnitude * graph_->drift_widgets()));
}

const Layout& DeviceEnv::layout_for_epoch(std::int64_t epoch) const {
  while (static_cast<std::int64_t>(layouts_.size()) <= epoch) {
    const auto next_epoch = static_cast<std::int64_t>(layouts_.size());
    layouts_.push_back(graph_->drift(layouts_.back(), moves_per_epoch(), cfg_.seed, next_epoch));
  }
  return layouts_[static_cast<std::size_t>(epoch)];
}

core::Observation DeviceEnv::reset(const core::Task& task) {
  if (!core::is_valid(task)) throw InvariantError("reset with a malformed task");
  state_ = EnvState{};
  state_.task = task;
  state_.epoch = epoch_for(counter_);
  state_.episode_counter = counter_;
  std::iota(state_.slot_rank.begin(), state_.slot_rank.end(), 0);
  if (cfg_.shuffle_results) {
    auto rng = core::derive_rng(cfg_.seed, {0x5407, static_cast<std::uint64_t>(counter_), salt_});
    std::shuffle(state_.slot_rank.begin(), state_.slot_rank.end(), rng);
  }
  ++counter_;
  prev_view_ = core::ScreenView{};
  return observe();
}

core::Observation DeviceEnv::observe() const {
  core::Observation o;
  o.current = view_of(*graph_, layout(), state_.slot_rank, state_.page);
  o.previous = prev_view_;
  o.step_index = state_.steps_taken;
  return o;
}

StepOutcome DeviceEnv::step(const Action& a, core::Rng& rng) {
  if (state_.done) throw InvariantError("step called on a finished episode");
  if (!core::is_valid(a, {cfg_.grid, 1 << 30, 1 << 30})) throw InvariantError("invalid action " + core::to_string(a));
  const auto& lay = layout();
  prev_view_ = view_of(*graph_, lay, state_.slot_rank, state_.page);
  ++state_.steps_taken;

  PageState next = apply_action(*graph_, lay, state_.slot_rank, state_.page, a);
  const bool navigates = !state_.page.overlay && next.screen != state_.page.screen;
  if (navigates && core::bernoulli(rng, cfg_.p_loadfail)) {
    next = state_.page;
    ++state_.load_failures;
  }
  state_.previous = state_.page.overlay ? ScreenRef{ScreenKind::Overlay} : state_.page.screen;
  state_.page = std::move(next);

  StepOutcome out;
  if (goal_holds(state_.page, state_.task.goal)) {
    state_.done = true;
    state_.success = true;
    out.reward = 1.0;
  } else if (state_.steps_taken >= cfg_.horizon) {
    state_.done = true;
  } else if (!state_.page.overlay && core::bernoulli(rng, cfg_.p_popup)) {
    const int n_cells = cfg_.grid * cfg_.grid;
    std::uniform_int_distribution<int> cell(0, n_cells - 1);
    state_.page.overlay = true;
    state_.page.dismiss_cell = cell(rng);
    do {
      state_.page.ad_cell = cell(rng);
    } while (state_.page.ad_cell == state_.page.dismiss_cell);
    ++state_.popups;
  }
  out.done = state_.done;
  out.observation = observe();
  return out;
}

std::string render_trace(const core::Trajectory& t) {
  std::ostringstream os;
  for (std::size_t h = 0; h < t.steps.size(); ++h) {
    const auto& s = t.steps[h];
    os << "h=" << h << " screen=" << core::to_string(s.observation.current.screen)
       << " a=" << core::to_string(s.action) << " r=" << s.reward << '\n';
  }
  return os.str();
}

}  // namespace digirl::synthdevice
