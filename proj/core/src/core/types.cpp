#include "digirl/core/types.hpp"

#include <cmath>
#include <sstream>

#include "digirl/core/error.hpp"
#include "digirl/core/rng.hpp"

namespace digirl::core {

bool is_valid(const Action& a, const ActionSpace& space) {
  switch (a.kind()) {
    case ActionKind::Tap: {
      const auto& t = a.as_tap();
      return t.x >= 0 && t.y >= 0 && t.x < space.grid && t.y < space.grid;
    }
    case ActionKind::Type: {
      const auto& toks = a.as_type().tokens;
      if (static_cast<int>(toks.size()) > space.max_type_len) return false;
      for (auto tok : toks) {
        if (tok <= 0 || tok >= space.vocab) return false;
      }
      return true;
    }
    case ActionKind::Press:
      return static_cast<int>(a.as_press().button) < kNumButtons;
  }
  return false;
}

std::string to_string(Button b) {
  switch (b) {
    case Button::Home: return "HOME";
    case Button::Back: return "BACK";
    case Button::Enter: return "ENTER";
  }
  return "?";
}

std::string to_string(const Action& a) {
  std::ostringstream os;
  switch (a.kind()) {
    case ActionKind::Tap:
      os << "Tap(" << a.as_tap().x << "," << a.as_tap().y << ")";
      break;
    case ActionKind::Type: {
      os << "Type(";
      const auto& toks = a.as_type().tokens;
      for (std::size_t i = 0; i < toks.size(); ++i) os << (i ? " " : "") << toks[i];
      os << ")";
      break;
    }
    case ActionKind::Press:
      os << "Press(" << to_string(a.as_press().button) << ")";
      break;
  }
  return os.str();
}

namespace {
constexpr const char* kKindNames[] = {"none",   "home",   "browser", "landing", "search", "results",
                                      "detail", "adpage", "app",     "overlay", "generic"};
}

std::string to_string(ScreenKind k) { return kKindNames[static_cast<int>(k)]; }

ScreenKind screen_kind_from_string(const std::string& s) {
  for (int i = 0; i < static_cast<int>(std::size(kKindNames)); ++i) {
    if (s == kKindNames[i]) return static_cast<ScreenKind>(i);
  }
  throw InvariantError("unknown screen kind '" + s + "'");
}

std::uint64_t ScreenRef::key() const {
  return hash_words({static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(site + 1),
                     static_cast<std::uint64_t>(query + 1), static_cast<std::uint64_t>(rank + 1),
                     static_cast<std::uint64_t>(index + 1)});
}

std::string to_string(const ScreenRef& s) {
  std::ostringstream os;
  os << to_string(s.kind);
  switch (s.kind) {
    case ScreenKind::Landing:
    case ScreenKind::Search:
    case ScreenKind::AdPage:
      os << "(site" << s.site << ")";
      break;
    case ScreenKind::Results:
      os << "(site" << s.site << ",q" << s.query << ")";
      break;
    case ScreenKind::Detail:
      os << "(site" << s.site << ",q" << s.query << ",r" << s.rank << ")";
      break;
    case ScreenKind::App:
    case ScreenKind::Generic:
      os << "(" << s.index << ")";
      break;
    default:
      break;
  }
  return os.str();
}

bool is_valid(const Task& t) {
  if (t.difficulty < 1 || t.difficulty > 3) return false;
  const bool has_query = t.goal.query >= 0;
  switch (t.difficulty) {
    case 1: return !has_query && !t.goal.select_first;
    case 2: return has_query && !t.goal.select_first;
    case 3: return has_query && t.goal.select_first;
  }
  return false;
}

std::string validate(const Trajectory& t, int horizon) {
  if (t.steps.empty()) return "trajectory is empty";
  if (horizon > 0 && static_cast<int>(t.steps.size()) > horizon) {
    return "trajectory length " + std::to_string(t.steps.size()) + " exceeds horizon " +
           std::to_string(horizon);
  }
  if (!(t.final_reward == 0.0 || t.final_reward == 1.0)) return "final_reward must be 0 or 1";
  for (std::size_t h = 0; h + 1 < t.steps.size(); ++h) {
    if (t.steps[h].done) return "done flag before the last step";
    if (t.steps[h].reward != 0.0) return "non-zero intermediate reward";
  }
  const Step& last = t.steps.back();
  if (!last.done) return "last step is not done";
  if (last.reward != t.final_reward) return "final_reward differs from last step reward";
  for (std::size_t h = 0; h < t.steps.size(); ++h) {
    if (t.steps[h].observation.step_index != static_cast<int>(h)) return "step_index mismatch";
  }
  return {};
}

}  // namespace digirl::core
