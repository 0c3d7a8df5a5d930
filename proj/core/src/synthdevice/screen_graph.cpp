#include "digirl/synthdevice/screen_graph.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "digirl/core/error.hpp"
#include "digirl/core/rng.hpp"
#include "json.hpp"

namespace digirl::synthdevice {

using core::ScreenKind;
using core::ScreenRef;

namespace {

// Unit numbering.
constexpr int kHomeUnit = 0;
constexpr int kBrowserUnit = 1;
constexpr int kLandingUnit = 2;
constexpr int kSearchUnit = kLandingUnit + kNumSites;
constexpr int kResultsUnit = kSearchUnit + kNumSites;
constexpr int kDetailUnit = kResultsUnit + kNumSites;
constexpr int kAdUnit = kDetailUnit + kNumSites;
constexpr int kBrowserAdUnit = kAdUnit + kNumSites;
constexpr int kAppUnit = kBrowserAdUnit + 1;
constexpr int kNumUnits = kAppUnit + kNumApps;

std::vector<LayoutUnit> make_units() {
  std::vector<LayoutUnit> units(kNumUnits);
  using F = WidgetFamily;
  units[kHomeUnit] = {ScreenKind::Home, -1, -1, {widget_id(F::BrowserIcon)}};
  for (int a = 0; a < kNumApps; ++a) units[kHomeUnit].widgets.push_back(widget_id(F::AppIcon, a));
  units[kBrowserUnit] = {ScreenKind::Browser, -1, -1, {}};
  for (int s = 0; s < kNumSites; ++s) units[kBrowserUnit].widgets.push_back(widget_id(F::SiteLink, s));
  units[kBrowserUnit].widgets.push_back(widget_id(F::BrowserAd));
  for (int s = 0; s < kNumSites; ++s) {
    units[static_cast<std::size_t>(kLandingUnit + s)] = {
        ScreenKind::Landing, s, -1,
        {widget_id(F::SearchBar), widget_id(F::Banner, 0), widget_id(F::Banner, 1), widget_id(F::Menu)}};
    units[static_cast<std::size_t>(kSearchUnit + s)] = {
        ScreenKind::Search, s, -1, {widget_id(F::SearchField), widget_id(F::ClearButton)}};
    LayoutUnit results{ScreenKind::Results, s, -1, {}};
    for (int k = 0; k < kResultSlots; ++k) results.widgets.push_back(widget_id(F::ResultSlot, k));
    results.widgets.push_back(widget_id(F::Sponsored));
    units[static_cast<std::size_t>(kResultsUnit + s)] = results;
    units[static_cast<std::size_t>(kDetailUnit + s)] = {
        ScreenKind::Detail, s, -1, {widget_id(F::AddToCart), widget_id(F::Similar)}};
    units[static_cast<std::size_t>(kAdUnit + s)] = {ScreenKind::AdPage, s, -1, {widget_id(F::AdBody)}};
  }
  units[kBrowserAdUnit] = {ScreenKind::AdPage, -1, -1, {widget_id(F::AdBody)}};
  for (int a = 0; a < kNumApps; ++a) {
    units[static_cast<std::size_t>(kAppUnit + a)] = {ScreenKind::App, -1, a, {widget_id(F::AppBody)}};
  }
  return units;
}

}  // namespace

bool drifts(const LayoutUnit& u) { return u.site >= 0; }

int Layout::count_moves(const Layout& a, const Layout& b) {
  int n = 0;
  for (std::size_t u = 0; u < a.cells.size(); ++u) {
    for (std::size_t k = 0; k < a.cells[u].size(); ++k) n += a.cells[u][k] != b.cells[u][k];
  }
  return n;
}

ScreenGraph ScreenGraph::generate(std::uint64_t seed, int grid, const QueryCatalog& catalog) {
  if (grid < 3) throw InvariantError("grid must be at least 3x3");
  ScreenGraph g;
  g.grid_ = grid;
  g.catalog_ = catalog;
  g.units_ = make_units();
  auto rng = core::derive_rng(seed, {0x1a70});
  const int n_cells = grid * grid;
  g.base_.grid = grid;
  for (const auto& unit : g.units_) {
    std::vector<int> cells(static_cast<std::size_t>(n_cells));
    for (int c = 0; c < n_cells; ++c) cells[static_cast<std::size_t>(c)] = c;
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(unit.widgets.size());
    std::vector<int> at(static_cast<std::size_t>(n_cells), -1);
    for (std::size_t k = 0; k < cells.size(); ++k) at[static_cast<std::size_t>(cells[k])] = static_cast<int>(k);
    g.base_.cells.push_back(std::move(cells));
    g.base_.widget_at.push_back(std::move(at));
  }
  g.validate();
  return g;
}

int ScreenGraph::total_widgets() const {
  int n = 0;
  for (const auto& u : units_) n += static_cast<int>(u.widgets.size());
  return n;
}

int ScreenGraph::drift_widgets() const {
  int n = 0;
  for (const auto& u : units_) n += drifts(u) ? static_cast<int>(u.widgets.size()) : 0;
  return n;
}

int ScreenGraph::unit_of(const ScreenRef& s) const {
  switch (s.kind) {
    case ScreenKind::Home: return kHomeUnit;
    case ScreenKind::Browser: return kBrowserUnit;
    case ScreenKind::Landing: return kLandingUnit + s.site;
    case ScreenKind::Search: return kSearchUnit + s.site;
    case ScreenKind::Results: return kResultsUnit + s.site;
    case ScreenKind::Detail: return kDetailUnit + s.site;
    case ScreenKind::AdPage: return s.site >= 0 ? kAdUnit + s.site : kBrowserAdUnit;
    case ScreenKind::App: return kAppUnit + s.index;
    default: return -1;
  }
}

std::optional<ScreenRef> ScreenGraph::target(const ScreenRef& from, int widget) const {
  using F = WidgetFamily;
  const int idx = widget_index(widget);
  switch (widget_family(widget)) {
    case F::BrowserIcon: return ScreenRef{ScreenKind::Browser};
    case F::AppIcon: return ScreenRef{ScreenKind::App, -1, -1, -1, idx};
    case F::SiteLink: return ScreenRef{ScreenKind::Landing, idx};
    case F::BrowserAd: return ScreenRef{ScreenKind::AdPage};
    case F::SearchBar: return ScreenRef{ScreenKind::Search, from.site};
    case F::Banner:
    case F::Sponsored:
    case F::Similar: return ScreenRef{ScreenKind::AdPage, from.site};
    case F::ResultSlot: return ScreenRef{ScreenKind::Detail, from.site, from.query, idx};
    default: return std::nullopt;
  }
}

ScreenRef ScreenGraph::back_target(const ScreenRef& from) const {
  switch (from.kind) {
    case ScreenKind::Landing: return {ScreenKind::Browser};
    case ScreenKind::Search: return {ScreenKind::Landing, from.site};
    case ScreenKind::Results: return {ScreenKind::Search, from.site};
    case ScreenKind::Detail: return {ScreenKind::Results, from.site, from.query};
    case ScreenKind::AdPage:
      return from.site >= 0 ? ScreenRef{ScreenKind::Landing, from.site} : ScreenRef{ScreenKind::Browser};
    default: return home();
  }
}

std::vector<ScreenRef> ScreenGraph::screens() const {
  std::vector<ScreenRef> out{home(), {ScreenKind::Browser}, {ScreenKind::AdPage}};
  for (int a = 0; a < kNumApps; ++a) out.push_back({ScreenKind::App, -1, -1, -1, a});
  for (int s = 0; s < kNumSites; ++s) {
    out.push_back({ScreenKind::Landing, s});
    out.push_back({ScreenKind::Search, s});
    out.push_back({ScreenKind::AdPage, s});
    for (int q = -1; q < catalog_.size(); ++q) {
      out.push_back({ScreenKind::Results, s, q});
      for (int r = 0; r < kResultSlots; ++r) out.push_back({ScreenKind::Detail, s, q, r});
    }
  }
  return out;
}

Layout ScreenGraph::drift(const Layout& from, int moves, std::uint64_t seed, std::int64_t epoch) const {
  Layout out = from;
  if (moves <= 0) return out;
  auto rng = core::derive_rng(seed, {0xd71f, static_cast<std::uint64_t>(epoch)});
  std::vector<std::pair<int, int>> placements;
  for (std::size_t u = 0; u < units_.size(); ++u) {
    if (!drifts(units_[u])) continue;
    for (std::size_t k = 0; k < units_[u].widgets.size(); ++k) placements.emplace_back(u, k);
  }
  if (moves > static_cast<int>(placements.size())) throw InvariantError("more drift moves than widgets");
  std::shuffle(placements.begin(), placements.end(), rng);
  const int n_cells = grid_ * grid_;
  for (int m = 0; m < moves; ++m) {
    const auto [u, k] = placements[static_cast<std::size_t>(m)];
    auto& at = out.widget_at[static_cast<std::size_t>(u)];
    std::vector<int> free;
    for (int c = 0; c < n_cells; ++c) {
      if (at[static_cast<std::size_t>(c)] < 0) free.push_back(c);
    }
    const int old_cell = out.cells[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)];
    const int new_cell = free[core::uniform_index(rng, free.size())];
    at[static_cast<std::size_t>(old_cell)] = -1;
    at[static_cast<std::size_t>(new_cell)] = k;
    out.cells[static_cast<std::size_t>(u)][static_cast<std::size_t>(k)] = new_cell;
  }
  return out;
}

std::string ScreenGraph::to_json(const Layout& layout) const {
  using nlohmann::json;
  json units = json::array();
  for (std::size_t u = 0; u < units_.size(); ++u) {
    const auto& unit = units_[u];
    ScreenRef repr{unit.kind, unit.site, unit.kind == ScreenKind::Results || unit.kind == ScreenKind::Detail ? 0 : -1,
                   -1, unit.app};
    json widgets = json::array();
    for (std::size_t k = 0; k < unit.widgets.size(); ++k) {
      auto tgt = target(repr, unit.widgets[k]);
      widgets.push_back({{"widget", unit.widgets[k]},
                         {"cell", layout.cells[u][k]},
                         {"target", tgt ? core::to_string(*tgt) : "none"}});
    }
    units.push_back({{"kind", core::to_string(unit.kind)},
                     {"site", unit.site},
                     {"app", unit.app},
                     {"back", core::to_string(back_target(repr))},
                     {"widgets", std::move(widgets)}});
  }
  json queries = json::array();
  for (const auto& q : catalog_.queries) queries.push_back(q);
  return json{{"grid", grid_}, {"units", std::move(units)}, {"queries", std::move(queries)}}.dump(1);
}

void ScreenGraph::validate() const {
  // Screen-level reachability: taps, BACK, HOME, and ENTER from a search
  // page to any catalog query's results.
  auto key = [](const ScreenRef& s) { return s.key(); };
  std::set<std::uint64_t> seen{key(home())};
  std::deque<ScreenRef> frontier{home()};
  while (!frontier.empty()) {
    const auto s = frontier.front();
    frontier.pop_front();
    std::vector<ScreenRef> next{back_target(s), home()};
    const int u = unit_of(s);
    if (u < 0) throw InvariantError("screen without layout unit: " + core::to_string(s));
    for (int w : units_[static_cast<std::size_t>(u)].widgets) {
      if (auto t = target(s, w)) next.push_back(*t);
    }
    if (s.kind == ScreenKind::Search) {
      for (int q = -1; q < catalog_.size(); ++q) next.push_back({ScreenKind::Results, s.site, q});
    }
    for (const auto& n : next) {
      if (seen.insert(key(n)).second) frontier.push_back(n);
    }
  }
  for (const auto& s : screens()) {
    if (!seen.count(key(s))) throw InvariantError("screen unreachable from home: " + core::to_string(s));
  }
  for (std::size_t u = 0; u < units_.size(); ++u) {
    std::set<int> cells(base_.cells[u].begin(), base_.cells[u].end());
    if (cells.size() != units_[u].widgets.size()) throw InvariantError("overlapping widgets in a unit");
  }
}

}  // namespace digirl::synthdevice
