#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace digirl::core {

/// Training hyperparameters. Defaults are the published values; the desk
/// profile (configs/desk.cfg) overrides the step sizes for the linear
/// models used here.
struct RunConfig {
  double actor_lr = 3e-3;
  double value_lr = 3e-3;
  double instruct_value_lr = 3e-3;
  int batch_size = 128;
  int rollouts_per_iter = 16;
  int buffer_capacity = 5000;
  double temperature = 1.0;
  double max_grad_norm = 0.01;
  double gae_lambda = 0.5;
  int actor_updates_per_iter = 20;
  int value_updates_per_iter = 5;
  int instruct_updates_per_iter = 5;
  int offline_actor_iters = 10;
  int offline_value_iters = 20;
  int offline_instruct_iters = 20;
  int horizon = 20;
  double top_p_fraction = 0.25;
  std::uint64_t seed = 0;

  // Extensions beyond the published table.
  double value_max_grad_norm = 0.01;  ///< clip for both value heads
  int value_batch_size = 0;           ///< 0 = full buffer per value update
  bool literal_mixing = true;         ///< (1 - l^k r) mixing weight; false = (1 - l^k)
  bool value_uses_action = false;     ///< condition V_step on (s, a)
  double reward_noise = 0.0;          ///< evaluator flip probability
  int eval_every = 5;                 ///< test evaluation cadence, iterations
  int eval_rollouts = 192;            ///< rollouts per test evaluation

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Applies key = value overrides; unknown keys throw ConfigError.
  void apply(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_map() const;
};

/// Parses a flat "key = value" file; '#' starts a comment.
std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path);
std::map<std::string, std::string> parse_kv(const std::string& text);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace digirl::core
