#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "digirl/core/replay_buffer.hpp"
#include "digirl/values/value_head.hpp"

namespace digirl::algo {

/// Step advantage from precomputed values.
///
///   A = l^k r + (1 - w) (target - v_h),   w = l^k r  (or l^k when !literal)
///
/// k counts the steps left until the terminal step (0 at the terminal
/// step); target is the next state's value, or the terminal reward r at the
/// terminal step. Intermediate rewards are zero.
double step_advantage(double v_h, double target, double r_terminal, int k, double lambda, bool literal = true);

/// Advantages for every step of one trajectory given V(s_h) for each step.
std::vector<double> step_advantages(const std::vector<double>& v, double r_terminal, double lambda,
                                    bool literal = true);

/// A_step of step h of t, evaluating the step head on the recorded
/// observations. H is the episode horizon. Throws InvariantError when h is
/// out of range.
double step_advantage(const core::Trajectory& t, std::size_t h, const values::ValueHead& v, double lambda, int H,
                      bool literal = true);

/// Keep iff A > 1/H.
bool step_filter(double a_step, int H);

/// r - V_instruct(c).
double instruct_advantage(const core::Trajectory& t, const values::ValueHead& v);

/// Number of trajectories kept from n at fraction p: ceil(p n), at least 1.
std::size_t top_p_count(std::size_t n, double p);

/// Indices of the top ceil(p n) advantages, highest first; ties go to the
/// larger index (newer trajectory).
std::vector<std::size_t> top_p_indices(const std::vector<double>& advantages, double p);

/// Trajectories of `snapshot` (oldest first) with the largest instruction
/// advantages.
std::vector<core::TrajectoryPtr> curriculum_filter(const std::vector<core::TrajectoryPtr>& snapshot,
                                                   const values::ValueHead& v, double top_p_fraction);

/// Self-normalised exp(A / beta) weights (sum to 1).
std::vector<double> awr_weights(const std::vector<double>& advantages, double beta);

struct AlgoVariant {
  enum Kind { DigiRL, FilteredBC, NoStepAdvantage, RegressionValues, VanillaAWR };
  Kind kind = DigiRL;
  double beta = 0.0;  ///< VanillaAWR only

  static AlgoVariant vanilla_awr(double beta);
  /// "digirl", "filtered_bc", "no_step_advantage", "regression_values",
  /// "vanilla_awr:0.1"
  static AlgoVariant parse(const std::string& s);
  std::string name() const;
  void validate() const;
  friend bool operator==(const AlgoVariant&, const AlgoVariant&) = default;
};

}  // namespace digirl::algo
