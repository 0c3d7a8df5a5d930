#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "digirl/core/types.hpp"
#include "digirl/synthdevice/tasks.hpp"

namespace digirl::synthdevice {

/// Widget families. A widget id is `family * kWidgetStride + index`.
enum class WidgetFamily : int {
  BrowserIcon = 0,
  AppIcon,
  SiteLink,
  BrowserAd,
  SearchBar,
  Banner,
  Menu,
  SearchField,
  ClearButton,
  ResultSlot,
  Sponsored,
  AddToCart,
  Similar,
  AdBody,
  AppBody,
  Dismiss,
  OverlayAd,
};

inline constexpr int kWidgetStride = 16;

constexpr int widget_id(WidgetFamily f, int index = 0) { return static_cast<int>(f) * kWidgetStride + index; }
constexpr WidgetFamily widget_family(int id) { return static_cast<WidgetFamily>(id / kWidgetStride); }
constexpr int widget_index(int id) { return id % kWidgetStride; }

/// A screen template that owns a widget layout. Screens of one kind on one
/// site share a unit (e.g. every results page of site 2).
struct LayoutUnit {
  core::ScreenKind kind = core::ScreenKind::Home;
  int site = -1;
  int app = -1;
  std::vector<int> widgets;
};

/// Website pages get redesigned; the home screen, the browser start page
/// and the apps keep their layout.
bool drifts(const LayoutUnit& u);

/// Widget placement for every unit at one drift epoch.
struct Layout {
  int grid = 8;
  std::vector<std::vector<int>> cells;          // [unit][slot] -> cell
  std::vector<std::vector<int>> widget_at;      // [unit][cell] -> slot or -1

  int cell_of(int unit, int slot) const { return cells[static_cast<std::size_t>(unit)][static_cast<std::size_t>(slot)]; }
  int slot_at(int unit, int cell) const { return widget_at[static_cast<std::size_t>(unit)][static_cast<std::size_t>(cell)]; }

  /// Number of (unit, widget) placements that differ.
  static int count_moves(const Layout& a, const Layout& b);
};

/// Screens, their widgets, and the epoch-0 layout.
///
/// Transitions are defined by `ScreenGraph::target`: the screen reached by
/// tapping a widget or pressing a button. Search submission (ENTER on a
/// search page) depends on the typed text and is resolved by the
/// environment through the query catalog.
class ScreenGraph {
 public:
  static ScreenGraph generate(std::uint64_t seed, int grid = 8,
                              const QueryCatalog& catalog = QueryCatalog::standard());

  int grid() const { return grid_; }
  const QueryCatalog& catalog() const { return catalog_; }
  const std::vector<LayoutUnit>& units() const { return units_; }
  int total_widgets() const;
  /// Widgets subject to drift: everything on website pages.
  int drift_widgets() const;
  const Layout& base_layout() const { return base_; }

  /// Layout unit rendering this screen, or -1 for overlays/sentinels.
  int unit_of(const core::ScreenRef& s) const;

  /// Screen reached by tapping `widget` on `from`; nullopt for no-op widgets.
  std::optional<core::ScreenRef> target(const core::ScreenRef& from, int widget) const;
  core::ScreenRef back_target(const core::ScreenRef& from) const;

  /// Every screen node (results/detail pages for all catalog queries plus
  /// the "no match" query -1).
  std::vector<core::ScreenRef> screens() const;

  /// Relocates exactly `moves` placements, each to a free cell of its unit.
  Layout drift(const Layout& from, int moves, std::uint64_t seed, std::int64_t epoch) const;

  /// JSON dump for inspection: units, widgets, cells and transitions.
  std::string to_json(const Layout& layout) const;

  /// Throws InvariantError when a structural invariant fails: connectivity
  /// from home, BACK defined, goal depth within difficulty * 3.
  void validate() const;

  static core::ScreenRef home() { return {core::ScreenKind::Home}; }

 private:
  int grid_ = 8;
  QueryCatalog catalog_;
  std::vector<LayoutUnit> units_;
  Layout base_;
};

}  // namespace digirl::synthdevice
