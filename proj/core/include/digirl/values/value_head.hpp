#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "digirl/core/replay_buffer.hpp"
#include "digirl/core/types.hpp"
#include "digirl/policy/features.hpp"

namespace digirl::values {

enum class ValueKind { Step, Instruct };

/// Logistic scorer sigmoid(w . phi) on the shared hashed feature space.
class ValueHead {
 public:
  explicit ValueHead(ValueKind kind, std::uint32_t dim = policy::kDefaultDim);

  ValueKind kind() const { return kind_; }
  std::uint32_t dim() const { return static_cast<std::uint32_t>(w_.size()); }
  std::int64_t version() const { return version_; }

  double score(const policy::FeatureVector& phi) const;
  /// sigmoid(score), kept strictly inside (0, 1).
  double value(const policy::FeatureVector& phi) const;

  double weight(std::uint32_t i) const { return w_[i]; }
  double& weight(std::uint32_t i) { return w_[i]; }
  void advance_version() { ++version_; }

  void save(const std::filesystem::path& path) const;
  static ValueHead load(const std::filesystem::path& path);

  friend bool operator==(const ValueHead&, const ValueHead&) = default;

 private:
  ValueKind kind_;
  std::int64_t version_ = 0;
  std::vector<double> w_;
};

struct ValueExample {
  policy::FeatureVector phi;
  double target = 0.0;  ///< final reward in {0, 1}
};

/// Features of the step head: the state, optionally joined with the action.
policy::FeatureVector step_features(const core::Observation& o, const core::Task& task, const core::Action* action,
                                    int grid, std::uint32_t dim = policy::kDefaultDim);

/// V_step(s, c). Throws InvariantError for an instruct head.
double v_step(const ValueHead& head, const core::Observation& o, const core::Task& task);
/// V_instruct(c); depends on the instruction only. Throws for a step head.
double v_instruct(const ValueHead& head, const core::Task& task);

/// Mean of -[r log V + (1 - r) log(1 - V)].
double bce_loss(const ValueHead& head, const std::vector<ValueExample>& batch);
/// Mean of (V - r)^2.
double mse_loss(const ValueHead& head, const std::vector<ValueExample>& batch);

/// Dense gradients (one entry per feature); used by the updates and the
/// gradient checks.
std::vector<double> bce_gradient(const ValueHead& head, const std::vector<ValueExample>& batch);
std::vector<double> mse_gradient(const ValueHead& head, const std::vector<ValueExample>& batch);

/// One clipped gradient step. Throws InvariantError on an empty batch or a
/// target outside {0, 1}; NumericError on a non-finite loss.
ValueHead bce_update(ValueHead head, const std::vector<ValueExample>& batch, double lr, double max_grad_norm);
ValueHead mse_update(ValueHead head, const std::vector<ValueExample>& batch, double lr, double max_grad_norm);

/// Columns: task_id,fitted_value,empirical_rate (one row per task seen in
/// the trajectories).
void write_value_audit(std::ostream& os, const ValueHead& instruct,
                       const std::vector<core::TrajectoryPtr>& trajectories);

}  // namespace digirl::values
