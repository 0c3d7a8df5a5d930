#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "digirl/core/rng.hpp"
#include "digirl/core/types.hpp"
#include "digirl/policy/features.hpp"

namespace digirl::policy {

/// Per-head action distributions at one state.
struct Distributions {
  std::vector<double> type;                ///< indexed by ActionKind
  std::vector<double> tap;                 ///< row-major cells
  std::vector<std::vector<double>> token;  ///< [position][token]; token 0 stops
  std::vector<double> button;              ///< indexed by Button
};

/// One training example: features of (o, task), the action, and a weight
/// on its negative log-likelihood (1 for hard-filtered regression).
struct Example {
  FeatureVector phi;
  core::Action action;
  double weight = 1.0;
};

/// Linear factored softmax policy over hashed features.
///
/// Weights are stored feature-major: row i holds every head's weights for
/// feature i, so a sparse feature vector touches |phi| contiguous rows.
/// A typed sequence t_1..t_n scores sum_l log p_l(t_l), plus log p_n(stop)
/// when n < L.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(core::ActionSpace space = {}, std::uint32_t dim = kDefaultDim);

  std::int64_t version() const { return version_; }
  const core::ActionSpace& space() const { return space_; }
  std::uint32_t dim() const { return dim_; }
  int width() const { return width_; }

  // column offsets inside a row
  int type_col(int k) const { return k; }
  int tap_col(int cell) const { return core::kNumActionKinds + cell; }
  int token_col(int pos, int tok) const { return core::kNumActionKinds + space_.cells() + pos * space_.vocab + tok; }
  int button_col(int b) const { return token_col(space_.max_type_len, 0) + b; }

  double weight(std::uint32_t feature, int col) const { return w_[index(feature, col)]; }
  double& weight(std::uint32_t feature, int col) { return w_[index(feature, col)]; }
  std::span<const double> row(std::uint32_t feature) const {
    return {w_.data() + static_cast<std::size_t>(feature) * static_cast<std::size_t>(width_),
            static_cast<std::size_t>(width_)};
  }

  Distributions distributions(const FeatureVector& phi, double temperature = 1.0) const;
  core::Action sample(const FeatureVector& phi, double temperature, core::Rng& rng) const;
  core::Action greedy(const FeatureVector& phi) const;
  double logprob(const FeatureVector& phi, const core::Action& a) const;

  /// Bumps the version; used by updates.
  void advance_version() { ++version_; }
  void set_version(std::int64_t v) { version_ = v; }
  bool all_finite() const;

  void save(const std::filesystem::path& path) const;
  static PolicySnapshot load(const std::filesystem::path& path);

  friend bool operator==(const PolicySnapshot&, const PolicySnapshot&) = default;

 private:
  std::size_t index(std::uint32_t feature, int col) const {
    return static_cast<std::size_t>(feature) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
  }
  std::vector<double> scores(const FeatureVector& phi) const;

  core::ActionSpace space_;
  std::uint32_t dim_;
  int width_;
  std::int64_t version_ = 0;
  std::vector<double> w_;
};

/// Gradient of the weighted mean negative log-likelihood, restricted to the
/// rows of features that occur in the batch.
struct SparseGradient {
  std::vector<std::uint32_t> features;  ///< sorted
  std::vector<double> rows;             ///< features.size() x width
  int width = 0;

  double norm() const;
};

SparseGradient nll_gradient(const PolicySnapshot& p, const std::vector<Example>& batch);

/// (1/N) sum_e weight_e * -log pi(a_e | s_e).
double mean_nll(const PolicySnapshot& p, const std::vector<Example>& batch);

struct UpdateStats {
  double loss = 0.0;          ///< before the step
  double grad_norm = 0.0;     ///< before clipping
  double applied_norm = 0.0;  ///< after clipping
};

/// One SGD step on mean_nll with the global gradient norm clipped to
/// max_grad_norm. Throws InvariantError for an empty batch and
/// NumericError for a non-finite gradient.
PolicySnapshot mle_update(PolicySnapshot p, const std::vector<Example>& batch, double lr, double max_grad_norm,
                          UpdateStats* stats = nullptr);

// Convenience forms taking raw observations.

struct Sample {
  core::Observation observation;
  core::Task task;
  core::Action action;
};

core::Action act(const PolicySnapshot& p, const core::Observation& o, const core::Task& task, double temperature,
                 core::Rng& rng);
double logprob(const PolicySnapshot& p, const core::Observation& o, const core::Task& task, const core::Action& a);
PolicySnapshot mle_update(PolicySnapshot p, const std::vector<Sample>& batch, double lr, double max_grad_norm,
                          UpdateStats* stats = nullptr);

}  // namespace digirl::policy
