#include "digirl/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "digirl/core/error.hpp"

namespace digirl::policy {

using core::Action;
using core::ActionKind;

namespace {

// softmax of z / temperature over [begin, end) of `scores`
std::vector<double> softmax(const double* z, int n, double temperature) {
  std::vector<double> p(static_cast<std::size_t>(n));
  const double mx = *std::max_element(z, z + n);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += p[static_cast<std::size_t>(k)] = std::exp((z[k] - mx) / temperature);
  for (auto& v : p) v /= sum;
  return p;
}

double log_softmax_at(const double* z, int n, int k) {
  const double mx = *std::max_element(z, z + n);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(z[j] - mx);
  return z[k] - mx - std::log(sum);
}

int draw(const std::vector<double>& p, core::Rng& rng) {
  const double u = core::uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return static_cast<int>(k);
  }
  // rounding: fall back to the last index with mass
  for (std::size_t k = p.size(); k-- > 0;) {
    if (p[k] > 0) return static_cast<int>(k);
  }
  return 0;
}

int argmax(const std::vector<double>& p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

void check_space(const core::ActionSpace& s) {
  if (s.grid < 1 || s.vocab < 2 || s.max_type_len < 1) throw InvariantError("degenerate action space");
}

}  // namespace

PolicySnapshot::PolicySnapshot(core::ActionSpace space, std::uint32_t dim)
    : space_(space), dim_(dim), width_(0) {
  check_space(space_);
  if (dim_ == 0) throw InvariantError("feature dimension must be positive");
  width_ = core::kNumActionKinds + space_.cells() + space_.vocab * space_.max_type_len + core::kNumButtons;
  w_.assign(static_cast<std::size_t>(dim_) * static_cast<std::size_t>(width_), 0.0);
}

std::vector<double> PolicySnapshot::scores(const FeatureVector& phi) const {
  std::vector<double> z(static_cast<std::size_t>(width_), 0.0);
  for (auto i : phi) {
    if (i >= dim_) throw InvariantError("feature index out of range");
    const double* r = w_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(width_);
    for (int c = 0; c < width_; ++c) z[static_cast<std::size_t>(c)] += r[c];
  }
  return z;
}

Distributions PolicySnapshot::distributions(const FeatureVector& phi, double temperature) const {
  if (!(temperature > 0)) throw InvariantError("temperature must be positive");
  const auto z = scores(phi);
  Distributions d;
  d.type = softmax(z.data() + type_col(0), core::kNumActionKinds, temperature);
  d.tap = softmax(z.data() + tap_col(0), space_.cells(), temperature);
  for (int l = 0; l < space_.max_type_len; ++l) {
    d.token.push_back(softmax(z.data() + token_col(l, 0), space_.vocab, temperature));
  }
  d.button = softmax(z.data() + button_col(0), core::kNumButtons, temperature);
  return d;
}

Action PolicySnapshot::sample(const FeatureVector& phi, double temperature, core::Rng& rng) const {
  const auto d = distributions(phi, temperature);
  switch (static_cast<ActionKind>(draw(d.type, rng))) {
    case ActionKind::Tap:
      return Action::tap_cell(draw(d.tap, rng), space_.grid);
    case ActionKind::Type: {
      std::vector<core::TokenId> toks;
      for (int l = 0; l < space_.max_type_len; ++l) {
        const int t = draw(d.token[static_cast<std::size_t>(l)], rng);
        if (t == 0) break;
        toks.push_back(t);
      }
      return Action::type(std::move(toks));
    }
    case ActionKind::Press:
      return Action::press(static_cast<core::Button>(draw(d.button, rng)));
  }
  return {};
}

Action PolicySnapshot::greedy(const FeatureVector& phi) const {
  const auto d = distributions(phi, 1.0);
  switch (static_cast<ActionKind>(argmax(d.type))) {
    case ActionKind::Tap:
      return Action::tap_cell(argmax(d.tap), space_.grid);
    case ActionKind::Type: {
      std::vector<core::TokenId> toks;
      for (int l = 0; l < space_.max_type_len; ++l) {
        const int t = argmax(d.token[static_cast<std::size_t>(l)]);
        if (t == 0) break;
        toks.push_back(t);
      }
      return Action::type(std::move(toks));
    }
    case ActionKind::Press:
      return Action::press(static_cast<core::Button>(argmax(d.button)));
  }
  return {};
}

double PolicySnapshot::logprob(const FeatureVector& phi, const Action& a) const {
  if (!core::is_valid(a, space_)) throw InvariantError("logprob of invalid action " + core::to_string(a));
  const auto z = scores(phi);
  double lp = log_softmax_at(z.data() + type_col(0), core::kNumActionKinds, static_cast<int>(a.kind()));
  switch (a.kind()) {
    case ActionKind::Tap:
      lp += log_softmax_at(z.data() + tap_col(0), space_.cells(), a.cell(space_.grid));
      break;
    case ActionKind::Type: {
      const auto& toks = a.as_type().tokens;
      const int n = static_cast<int>(toks.size());
      for (int l = 0; l < n; ++l) {
        lp += log_softmax_at(z.data() + token_col(l, 0), space_.vocab, toks[static_cast<std::size_t>(l)]);
      }
      if (n < space_.max_type_len) lp += log_softmax_at(z.data() + token_col(n, 0), space_.vocab, 0);
      break;
    }
    case ActionKind::Press:
      lp += log_softmax_at(z.data() + button_col(0), core::kNumButtons, static_cast<int>(a.as_press().button));
      break;
  }
  return lp;
}

bool PolicySnapshot::all_finite() const {
  return std::all_of(w_.begin(), w_.end(), [](double v) { return std::isfinite(v); });
}

namespace {
constexpr char kMagic[8] = {'D', 'G', 'R', 'L', 'P', 'O', 'L', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InvariantError("truncated policy file");
  return v;
}
}  // namespace

// Sparse binary dump: header, then (feature, row) for every non-zero row.
void PolicySnapshot::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvariantError("cannot write " + path.string());
  os.write(kMagic, sizeof kMagic);
  put(os, version_);
  put(os, dim_);
  put<std::int32_t>(os, space_.grid);
  put<std::int32_t>(os, space_.vocab);
  put<std::int32_t>(os, space_.max_type_len);
  std::uint32_t n_rows = 0;
  for (std::uint32_t i = 0; i < dim_; ++i) {
    auto r = row(i);
    n_rows += std::any_of(r.begin(), r.end(), [](double v) { return v != 0.0; });
  }
  put(os, n_rows);
  for (std::uint32_t i = 0; i < dim_; ++i) {
    auto r = row(i);
    if (std::none_of(r.begin(), r.end(), [](double v) { return v != 0.0; })) continue;
    put(os, i);
    os.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(r.size_bytes()));
  }
  if (!os) throw InvariantError("write failed for " + path.string());
}

PolicySnapshot PolicySnapshot::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvariantError("cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw InvariantError("not a policy file: " + path.string());
  const auto version = get<std::int64_t>(is);
  const auto dim = get<std::uint32_t>(is);
  core::ActionSpace space;
  space.grid = get<std::int32_t>(is);
  space.vocab = get<std::int32_t>(is);
  space.max_type_len = get<std::int32_t>(is);
  PolicySnapshot p(space, dim);
  p.version_ = version;
  const auto n_rows = get<std::uint32_t>(is);
  for (std::uint32_t k = 0; k < n_rows; ++k) {
    const auto i = get<std::uint32_t>(is);
    if (i >= dim) throw InvariantError("corrupt policy file: row out of range");
    is.read(reinterpret_cast<char*>(p.w_.data() + p.index(i, 0)),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.width_)));
    if (!is) throw InvariantError("truncated policy file");
  }
  return p;
}

double SparseGradient::norm() const {
  double s = 0.0;
  for (double v : rows) s += v * v;
  return std::sqrt(s);
}

namespace {

// d(-log pi)/dz for one example, as (column, value) pairs.
void score_gradient(const PolicySnapshot& p, const Example& e, std::vector<std::pair<int, double>>& out) {
  out.clear();
  const auto d = p.distributions(e.phi, 1.0);
  const auto& a = e.action;
  const int kind = static_cast<int>(a.kind());
  for (int k = 0; k < core::kNumActionKinds; ++k) {
    out.emplace_back(p.type_col(k), d.type[static_cast<std::size_t>(k)] - (k == kind));
  }
  auto head = [&](const std::vector<double>& probs, int col0, int target) {
    for (std::size_t k = 0; k < probs.size(); ++k) {
      out.emplace_back(col0 + static_cast<int>(k), probs[k] - (static_cast<int>(k) == target));
    }
  };
  switch (a.kind()) {
    case ActionKind::Tap:
      head(d.tap, p.tap_col(0), a.cell(p.space().grid));
      break;
    case ActionKind::Type: {
      const auto& toks = a.as_type().tokens;
      const int n = static_cast<int>(toks.size());
      for (int l = 0; l < n; ++l) head(d.token[static_cast<std::size_t>(l)], p.token_col(l, 0), toks[static_cast<std::size_t>(l)]);
      if (n < p.space().max_type_len) head(d.token[static_cast<std::size_t>(n)], p.token_col(n, 0), 0);
      break;
    }
    case ActionKind::Press:
      head(d.button, p.button_col(0), static_cast<int>(a.as_press().button));
      break;
  }
}

}  // namespace

SparseGradient nll_gradient(const PolicySnapshot& p, const std::vector<Example>& batch) {
  if (batch.empty()) throw InvariantError("gradient of an empty batch");
  SparseGradient g;
  g.width = p.width();
  for (const auto& e : batch) g.features.insert(g.features.end(), e.phi.begin(), e.phi.end());
  std::sort(g.features.begin(), g.features.end());
  g.features.erase(std::unique(g.features.begin(), g.features.end()), g.features.end());
  g.rows.assign(g.features.size() * static_cast<std::size_t>(g.width), 0.0);

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<std::pair<int, double>> dz;
  for (const auto& e : batch) {
    if (!core::is_valid(e.action, p.space())) throw InvariantError("invalid action in batch: " + core::to_string(e.action));
    if (e.weight == 0.0) continue;
    score_gradient(p, e, dz);
    const double scale = e.weight * inv_n;
    for (auto i : e.phi) {
      const auto slot = static_cast<std::size_t>(std::lower_bound(g.features.begin(), g.features.end(), i) - g.features.begin());
      double* r = g.rows.data() + slot * static_cast<std::size_t>(g.width);
      for (const auto& [c, v] : dz) r[c] += scale * v;
    }
  }
  return g;
}

double mean_nll(const PolicySnapshot& p, const std::vector<Example>& batch) {
  if (batch.empty()) throw InvariantError("loss of an empty batch");
  double s = 0.0;
  for (const auto& e : batch) s -= e.weight * p.logprob(e.phi, e.action);
  return s / static_cast<double>(batch.size());
}

PolicySnapshot mle_update(PolicySnapshot p, const std::vector<Example>& batch, double lr, double max_grad_norm,
                          UpdateStats* stats) {
  if (batch.empty()) throw InvariantError("mle_update needs a non-empty batch");
  if (!(lr > 0) || !(max_grad_norm > 0)) throw InvariantError("lr and max_grad_norm must be positive");
  auto g = nll_gradient(p, batch);
  const double norm = g.norm();
  if (!std::isfinite(norm)) {
    throw NumericError("non-finite policy gradient at version " + std::to_string(p.version()));
  }
  const double scale = norm > max_grad_norm ? max_grad_norm / norm : 1.0;
  if (stats) {
    stats->loss = mean_nll(p, batch);
    stats->grad_norm = norm;
    stats->applied_norm = norm * scale;
  }
  for (std::size_t k = 0; k < g.features.size(); ++k) {
    const double* r = g.rows.data() + k * static_cast<std::size_t>(g.width);
    for (int c = 0; c < g.width; ++c) p.weight(g.features[k], c) -= lr * scale * r[c];
  }
  p.advance_version();
  return p;
}

Action act(const PolicySnapshot& p, const core::Observation& o, const core::Task& task, double temperature,
           core::Rng& rng) {
  return p.sample(featurize(o, task, p.dim()), temperature, rng);
}

double logprob(const PolicySnapshot& p, const core::Observation& o, const core::Task& task, const Action& a) {
  return p.logprob(featurize(o, task, p.dim()), a);
}

PolicySnapshot mle_update(PolicySnapshot p, const std::vector<Sample>& batch, double lr, double max_grad_norm,
                          UpdateStats* stats) {
  std::vector<Example> ex;
  ex.reserve(batch.size());
  for (const auto& s : batch) ex.push_back({featurize(s.observation, s.task, p.dim()), s.action, 1.0});
  return mle_update(std::move(p), ex, lr, max_grad_norm, stats);
}

}  // namespace digirl::policy
