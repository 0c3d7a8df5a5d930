#include "digirl/algo/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "digirl/core/error.hpp"

namespace digirl::algo {

double step_advantage(double v_h, double target, double r_terminal, int k, double lambda, bool literal) {
  const double lk = std::pow(lambda, k);
  const double mix = literal ? lk * r_terminal : lk;
  return lk * r_terminal + (1.0 - mix) * (target - v_h);
}

std::vector<double> step_advantages(const std::vector<double>& v, double r_terminal, double lambda, bool literal) {
  const int n = static_cast<int>(v.size());
  std::vector<double> a(v.size());
  for (int h = 0; h < n; ++h) {
    const double target = h + 1 < n ? v[static_cast<std::size_t>(h + 1)] : r_terminal;
    a[static_cast<std::size_t>(h)] = step_advantage(v[static_cast<std::size_t>(h)], target, r_terminal, n - 1 - h, lambda, literal);
  }
  return a;
}

double step_advantage(const core::Trajectory& t, std::size_t h, const values::ValueHead& v, double lambda, int H,
                      bool literal) {
  if (h >= t.steps.size()) throw InvariantError("step index out of range");
  if (H < static_cast<int>(t.steps.size())) throw InvariantError("trajectory longer than the horizon");
  if (lambda < 0 || lambda > 1) throw InvariantError("lambda must lie in [0, 1]");
  const auto n = t.steps.size();
  const double v_h = values::v_step(v, t.steps[h].observation, t.task);
  const double target = h + 1 < n ? values::v_step(v, t.steps[h + 1].observation, t.task) : t.final_reward;
  return step_advantage(v_h, target, t.final_reward, static_cast<int>(n - 1 - h), lambda, literal);
}

bool step_filter(double a_step, int H) {
  if (H < 1) throw InvariantError("horizon must be at least 1");
  return a_step > 1.0 / H;
}

double instruct_advantage(const core::Trajectory& t, const values::ValueHead& v) {
  return t.final_reward - values::v_instruct(v, t.task);
}

std::size_t top_p_count(std::size_t n, double p) {
  if (!(p > 0 && p <= 1)) throw InvariantError("top_p_fraction must lie in (0, 1]");
  if (n == 0) return 0;
  // the epsilon keeps p n = 2.0000000000000004 from rounding up to 3
  const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

std::vector<std::size_t> top_p_indices(const std::vector<double>& advantages, double p) {
  std::vector<std::size_t> idx(advantages.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (advantages[a] != advantages[b]) return advantages[a] > advantages[b];
    return a > b;
  });
  idx.resize(top_p_count(advantages.size(), p));
  return idx;
}

std::vector<core::TrajectoryPtr> curriculum_filter(const std::vector<core::TrajectoryPtr>& snapshot,
                                                   const values::ValueHead& v, double top_p_fraction) {
  if (snapshot.empty()) throw InvariantError("curriculum_filter on an empty buffer");
  std::vector<double> adv;
  adv.reserve(snapshot.size());
  for (const auto& t : snapshot) adv.push_back(instruct_advantage(*t, v));
  std::vector<core::TrajectoryPtr> out;
  for (auto i : top_p_indices(adv, top_p_fraction)) out.push_back(snapshot[i]);
  return out;
}

std::vector<double> awr_weights(const std::vector<double>& advantages, double beta) {
  if (!(beta > 0)) throw InvariantError("AWR temperature must be positive");
  if (advantages.empty()) return {};
  const double mx = *std::max_element(advantages.begin(), advantages.end());
  std::vector<double> w(advantages.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] = std::exp((advantages[i] - mx) / beta);
  for (auto& x : w) x /= sum;
  return w;
}

AlgoVariant AlgoVariant::vanilla_awr(double beta) { return {VanillaAWR, beta}; }

AlgoVariant AlgoVariant::parse(const std::string& s) {
  if (s == "digirl") return {DigiRL, 0};
  if (s == "filtered_bc") return {FilteredBC, 0};
  if (s == "no_step_advantage") return {NoStepAdvantage, 0};
  if (s == "regression_values") return {RegressionValues, 0};
  if (s.rfind("vanilla_awr", 0) == 0) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError("vanilla_awr needs a temperature, e.g. vanilla_awr:0.1");
    AlgoVariant v{VanillaAWR, 0};
    try {
      v.beta = std::stod(s.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad AWR temperature in '" + s + "'");
    }
    v.validate();
    return v;
  }
  throw ConfigError("unknown algorithm variant '" + s + "'");
}

std::string AlgoVariant::name() const {
  switch (kind) {
    case DigiRL: return "digirl";
    case FilteredBC: return "filtered_bc";
    case NoStepAdvantage: return "no_step_advantage";
    case RegressionValues: return "regression_values";
    case VanillaAWR: {
      std::string b = std::to_string(beta);
      b.erase(b.find_last_not_of('0') + 1);
      if (b.back() == '.') b.pop_back();
      return "vanilla_awr:" + b;
    }
  }
  return "?";
}

void AlgoVariant::validate() const {
  if (kind == VanillaAWR && !(beta > 0)) throw ConfigError("vanilla_awr needs beta > 0");
}

}  // namespace digirl::algo
