#include "digirl/values/value_head.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "digirl/core/error.hpp"

namespace digirl::values {

namespace {

constexpr double kScoreClamp = 30.0;

double sigmoid(double z) {
  z = std::clamp(z, -kScoreClamp, kScoreClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

// log(1 + e^z) without overflow
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_batch(const std::vector<ValueExample>& batch) {
  if (batch.empty()) throw InvariantError("value update needs a non-empty batch");
  for (const auto& e : batch) {
    if (e.target != 0.0 && e.target != 1.0) throw InvariantError("value targets must be 0 or 1");
  }
}

template <typename PerExample>
std::vector<double> dense_gradient(const ValueHead& head, const std::vector<ValueExample>& batch, PerExample dz) {
  std::vector<double> g(head.dim(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& e : batch) {
    const double d = dz(head.score(e.phi), e.target) * inv_n;
    for (auto i : e.phi) g[i] += d;
  }
  return g;
}

ValueHead step(ValueHead head, const std::vector<double>& g, double lr, double max_grad_norm) {
  double norm = 0.0;
  for (double v : g) norm += v * v;
  norm = std::sqrt(norm);
  if (!std::isfinite(norm)) throw NumericError("non-finite value gradient");
  const double scale = norm > max_grad_norm ? max_grad_norm / norm : 1.0;
  for (std::uint32_t i = 0; i < g.size(); ++i) {
    if (g[i] != 0.0) head.weight(i) -= lr * scale * g[i];
  }
  head.advance_version();
  return head;
}

}  // namespace

ValueHead::ValueHead(ValueKind kind, std::uint32_t dim) : kind_(kind), w_(dim, 0.0) {
  if (dim == 0) throw InvariantError("feature dimension must be positive");
}

double ValueHead::score(const policy::FeatureVector& phi) const {
  double z = 0.0;
  for (auto i : phi) {
    if (i >= w_.size()) throw InvariantError("feature index out of range");
    z += w_[i];
  }
  return z;
}

double ValueHead::value(const policy::FeatureVector& phi) const { return sigmoid(score(phi)); }

policy::FeatureVector step_features(const core::Observation& o, const core::Task& task, const core::Action* action,
                                    int grid, std::uint32_t dim) {
  auto phi = policy::featurize(o, task, dim);
  if (action) phi = policy::merge(phi, policy::action_features(*action, o, grid, dim));
  return phi;
}

double v_step(const ValueHead& head, const core::Observation& o, const core::Task& task) {
  if (head.kind() != ValueKind::Step) throw InvariantError("v_step needs a step value head");
  return head.value(policy::featurize(o, task, head.dim()));
}

double v_instruct(const ValueHead& head, const core::Task& task) {
  if (head.kind() != ValueKind::Instruct) throw InvariantError("v_instruct needs an instruct value head");
  return head.value(policy::instruction_features(task, head.dim()));
}

double bce_loss(const ValueHead& head, const std::vector<ValueExample>& batch) {
  if (batch.empty()) throw InvariantError("loss of an empty batch");
  double s = 0.0;
  // -[r log s(z) + (1-r) log(1-s(z))] = softplus(z) - r z
  for (const auto& e : batch) {
    const double z = head.score(e.phi);
    s += softplus(z) - e.target * z;
  }
  return s / static_cast<double>(batch.size());
}

double mse_loss(const ValueHead& head, const std::vector<ValueExample>& batch) {
  if (batch.empty()) throw InvariantError("loss of an empty batch");
  double s = 0.0;
  for (const auto& e : batch) {
    const double d = 1.0 / (1.0 + std::exp(-head.score(e.phi))) - e.target;
    s += d * d;
  }
  return s / static_cast<double>(batch.size());
}

std::vector<double> bce_gradient(const ValueHead& head, const std::vector<ValueExample>& batch) {
  return dense_gradient(head, batch, [](double z, double r) { return 1.0 / (1.0 + std::exp(-z)) - r; });
}

std::vector<double> mse_gradient(const ValueHead& head, const std::vector<ValueExample>& batch) {
  return dense_gradient(head, batch, [](double z, double r) {
    const double v = 1.0 / (1.0 + std::exp(-z));
    return 2.0 * (v - r) * v * (1.0 - v);
  });
}

ValueHead bce_update(ValueHead head, const std::vector<ValueExample>& batch, double lr, double max_grad_norm) {
  check_batch(batch);
  if (!std::isfinite(bce_loss(head, batch))) throw NumericError("non-finite cross-entropy loss");
  const auto g = bce_gradient(head, batch);
  return step(std::move(head), g, lr, max_grad_norm);
}

ValueHead mse_update(ValueHead head, const std::vector<ValueExample>& batch, double lr, double max_grad_norm) {
  check_batch(batch);
  if (!std::isfinite(mse_loss(head, batch))) throw NumericError("non-finite squared-error loss");
  const auto g = mse_gradient(head, batch);
  return step(std::move(head), g, lr, max_grad_norm);
}

void write_value_audit(std::ostream& os, const ValueHead& instruct,
                       const std::vector<core::TrajectoryPtr>& trajectories) {
  std::map<int, std::pair<int, int>> tally;  // id -> (successes, total)
  std::map<int, const core::Task*> task_of;
  for (const auto& t : trajectories) {
    auto& [s, n] = tally[t->task.id];
    s += t->succeeded();
    ++n;
    task_of[t->task.id] = &t->task;
  }
  os << "task_id,fitted_value,empirical_rate\n";
  for (const auto& [id, sn] : tally) {
    os << id << ',' << v_instruct(instruct, *task_of[id]) << ','
       << static_cast<double>(sn.first) / sn.second << '\n';
  }
}

namespace {
constexpr char kMagic[8] = {'D', 'G', 'R', 'L', 'V', 'A', 'L', '1'};
}

void ValueHead::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvariantError("cannot write " + path.string());
  os.write(kMagic, sizeof kMagic);
  const std::int32_t kind = static_cast<std::int32_t>(kind_);
  const std::uint32_t dim = this->dim();
  os.write(reinterpret_cast<const char*>(&kind), sizeof kind);
  os.write(reinterpret_cast<const char*>(&version_), sizeof version_);
  os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
  os.write(reinterpret_cast<const char*>(w_.data()), static_cast<std::streamsize>(w_.size() * sizeof(double)));
  if (!os) throw InvariantError("write failed for " + path.string());
}

ValueHead ValueHead::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvariantError("cannot open " + path.string());
  char magic[8];
  std::int32_t kind = 0;
  std::int64_t version = 0;
  std::uint32_t dim = 0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&kind), sizeof kind);
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  is.read(reinterpret_cast<char*>(&dim), sizeof dim);
  if (!is || std::string(magic, 8) != std::string(kMagic, 8) || dim == 0 || kind < 0 || kind > 1) {
    throw InvariantError("not a value head file: " + path.string());
  }
  ValueHead h(static_cast<ValueKind>(kind), dim);
  h.version_ = version;
  is.read(reinterpret_cast<char*>(h.w_.data()), static_cast<std::streamsize>(h.w_.size() * sizeof(double)));
  if (!is) throw InvariantError("truncated value head file");
  return h;
}

}  // namespace digirl::values
