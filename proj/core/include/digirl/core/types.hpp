#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace digirl::core {

using TokenId = int;

/// Sizes of the factored action space.
struct ActionSpace {
  int grid = 8;          ///< taps address a grid x grid lattice of cells
  int vocab = 16;        ///< typing vocabulary; token 0 is the stop/pad token
  int max_type_len = 8;  ///< longest typed sequence

  int cells() const { return grid * grid; }
  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;
};

enum class ActionKind : std::uint8_t { Tap = 0, Type = 1, Press = 2 };
enum class Button : std::uint8_t { Home = 0, Back = 1, Enter = 2 };

inline constexpr int kNumActionKinds = 3;
inline constexpr int kNumButtons = 3;

struct TapPayload {
  int x = 0;
  int y = 0;
  friend bool operator==(const TapPayload&, const TapPayload&) = default;
};

struct TypePayload {
  std::vector<TokenId> tokens;  // never contains the stop token
  friend bool operator==(const TypePayload&, const TypePayload&) = default;
};

struct PressPayload {
  Button button = Button::Back;
  friend bool operator==(const PressPayload&, const PressPayload&) = default;
};

/// One agent action. The variant makes "exactly one payload" structural.
class Action {
 public:
  Action() : payload_(PressPayload{}) {}

  static Action tap(int x, int y) { return Action(TapPayload{x, y}); }
  static Action tap_cell(int cell, int grid) { return tap(cell % grid, cell / grid); }
  static Action type(std::vector<TokenId> tokens) { return Action(TypePayload{std::move(tokens)}); }
  static Action press(Button b) { return Action(PressPayload{b}); }

  ActionKind kind() const { return static_cast<ActionKind>(payload_.index()); }
  const TapPayload& as_tap() const { return std::get<TapPayload>(payload_); }
  const TypePayload& as_type() const { return std::get<TypePayload>(payload_); }
  const PressPayload& as_press() const { return std::get<PressPayload>(payload_); }

  /// Row-major cell index of a tap.
  int cell(int grid) const { return as_tap().y * grid + as_tap().x; }

  friend bool operator==(const Action&, const Action&) = default;

 private:
  using Payload = std::variant<TapPayload, TypePayload, PressPayload>;
  explicit Action(Payload p) : payload_(std::move(p)) {}
  Payload payload_;
};

bool is_valid(const Action& a, const ActionSpace& space);
std::string to_string(const Action& a);
std::string to_string(Button b);

// Screen vocabulary shared by the environment, the featurizer and the logs.

enum class ScreenKind : std::uint8_t {
  None = 0,  // sentinel "no previous screen"
  Home,
  Browser,
  Landing,
  Search,
  Results,
  Detail,
  AdPage,
  App,
  Overlay,
  Generic,  // abstract states of small test MDPs
};

std::string to_string(ScreenKind k);
ScreenKind screen_kind_from_string(const std::string& s);

/// Identity of a screen node. Unused coordinates are -1.
struct ScreenRef {
  ScreenKind kind = ScreenKind::None;
  int site = -1;
  int query = -1;
  int rank = -1;
  int index = -1;  // app index for App screens, state index for Generic

  std::uint64_t key() const;
  friend bool operator==(const ScreenRef&, const ScreenRef&) = default;
};

std::string to_string(const ScreenRef& s);

struct WidgetView {
  int widget = 0;
  int cell = 0;
  int label = -1;  // displayed rank for result slots
  TokenId caption = 0;  // text printed on the widget, 0 = none
  friend bool operator==(const WidgetView&, const WidgetView&) = default;
};

/// Everything the agent can read off one screen.
struct ScreenView {
  ScreenRef screen;
  std::vector<WidgetView> widgets;
  std::vector<TokenId> typed;
  friend bool operator==(const ScreenView&, const ScreenView&) = default;
};

struct Observation {
  ScreenView current;
  ScreenView previous;  // kind None at h = 0
  int step_index = 0;
  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class Split : std::uint8_t { Train = 0, Test = 1 };

struct GoalSpec {
  int site = 0;
  int query = -1;
  bool select_first = false;
  friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

struct Task {
  int id = 0;
  std::vector<TokenId> instruction;
  int difficulty = 1;
  GoalSpec goal;
  Split split = Split::Train;
  friend bool operator==(const Task&, const Task&) = default;
};

/// Difficulty must agree with the arity of the goal.
bool is_valid(const Task& t);

struct Step {
  Observation observation;
  Action action;
  double reward = 0.0;
  bool done = false;
  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  Task task;
  std::vector<Step> steps;
  double final_reward = 0.0;
  std::int64_t policy_version = 0;
  std::int64_t wallclock_epoch = 0;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;

  bool succeeded() const { return final_reward > 0.5; }
  std::size_t size() const { return steps.size(); }
};

/// Returns an empty string when t satisfies every trajectory invariant,
/// otherwise a description of the first violation. horizon <= 0 skips the
/// length check.
std::string validate(const Trajectory& t, int horizon);

}  // namespace digirl::core
