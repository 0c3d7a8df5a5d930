#include "digirl/core/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "digirl/core/error.hpp"
#include "digirl/core/kv.hpp"

namespace digirl::core {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename Fn>
void for_each_field(RunConfig& c, Fn&& fn) {
  fn("actor_lr", c.actor_lr);
  fn("value_lr", c.value_lr);
  fn("instruct_value_lr", c.instruct_value_lr);
  fn("batch_size", c.batch_size);
  fn("rollouts_per_iter", c.rollouts_per_iter);
  fn("buffer_capacity", c.buffer_capacity);
  fn("temperature", c.temperature);
  fn("max_grad_norm", c.max_grad_norm);
  fn("gae_lambda", c.gae_lambda);
  fn("actor_updates_per_iter", c.actor_updates_per_iter);
  fn("value_updates_per_iter", c.value_updates_per_iter);
  fn("instruct_updates_per_iter", c.instruct_updates_per_iter);
  fn("offline_actor_iters", c.offline_actor_iters);
  fn("offline_value_iters", c.offline_value_iters);
  fn("offline_instruct_iters", c.offline_instruct_iters);
  fn("horizon", c.horizon);
  fn("top_p_fraction", c.top_p_fraction);
  fn("seed", c.seed);
  fn("value_max_grad_norm", c.value_max_grad_norm);
  fn("value_batch_size", c.value_batch_size);
  fn("literal_mixing", c.literal_mixing);
  fn("value_uses_action", c.value_uses_action);
  fn("reward_noise", c.reward_noise);
  fn("eval_every", c.eval_every);
  fn("eval_rollouts", c.eval_rollouts);
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string("field '") + field + "': " + what);
}

}  // namespace

void RunConfig::validate() const {
  require(actor_lr > 0, "actor_lr", "must be positive");
  require(value_lr > 0, "value_lr", "must be positive");
  require(instruct_value_lr > 0, "instruct_value_lr", "must be positive");
  require(batch_size > 0, "batch_size", "must be positive");
  require(rollouts_per_iter > 0, "rollouts_per_iter", "must be positive");
  require(buffer_capacity > 0, "buffer_capacity", "must be positive");
  require(temperature > 0, "temperature", "must be positive");
  require(max_grad_norm > 0, "max_grad_norm", "must be positive");
  require(gae_lambda >= 0 && gae_lambda <= 1, "gae_lambda", "must lie in [0, 1]");
  require(actor_updates_per_iter > 0, "actor_updates_per_iter", "must be positive");
  require(value_updates_per_iter > 0, "value_updates_per_iter", "must be positive");
  require(instruct_updates_per_iter > 0, "instruct_updates_per_iter", "must be positive");
  require(offline_actor_iters > 0, "offline_actor_iters", "must be positive");
  require(offline_value_iters > 0, "offline_value_iters", "must be positive");
  require(offline_instruct_iters > 0, "offline_instruct_iters", "must be positive");
  require(horizon > 0, "horizon", "must be positive");
  require(top_p_fraction > 0 && top_p_fraction <= 1, "top_p_fraction", "must lie in (0, 1]");
  require(value_max_grad_norm > 0, "value_max_grad_norm", "must be positive");
  require(value_batch_size >= 0, "value_batch_size", "must be non-negative");
  require(reward_noise >= 0 && reward_noise < 0.5, "reward_noise", "must lie in [0, 0.5)");
  require(eval_every > 0, "eval_every", "must be positive");
  require(eval_rollouts > 0, "eval_rollouts", "must be positive");
}

void RunConfig::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    bool found = false;
    for_each_field(*this, [&](const char* name, auto& field) {
      if (key != name) return;
      found = true;
      parse_field(key, value, field);
    });
    if (!found) throw ConfigError("unknown config field '" + key + "'");
  }
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  auto copy = *this;
  for_each_field(copy, [&](const char* name, auto& field) { out[name] = format_field(field); });
  return out;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv(ss.str());
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg;
  cfg.apply(read_kv_file(path));
  cfg.validate();
  return cfg;
}

}  // namespace digirl::core
