#include "autobid/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "autobid/errors.hpp"

namespace autobid::data {

namespace {
constexpr double kZeroVarianceThreshold = 1e-12;
}

void to_json(nlohmann::json& j, const NormStats& s) {
  j = {{"state_mean", s.state_mean}, {"state_scale", s.state_scale}, {"rtg_mean", s.rtg_mean},
       {"rtg_scale", s.rtg_scale},   {"return_max", s.return_max},   {"return_mean", s.return_mean}};
}

void from_json(const nlohmann::json& j, NormStats& s) {
  j.at("state_mean").get_to(s.state_mean);
  j.at("state_scale").get_to(s.state_scale);
  j.at("rtg_mean").get_to(s.rtg_mean);
  j.at("rtg_scale").get_to(s.rtg_scale);
  j.at("return_max").get_to(s.return_max);
  j.at("return_mean").get_to(s.return_mean);
}

NormStats compute_norm_stats(const Dataset& dataset, const std::vector<int64_t>& episode_ids) {
  std::unordered_set<int64_t> wanted(episode_ids.begin(), episode_ids.end());
  auto selected = [&](const Trajectory& t) { return wanted.empty() || wanted.count(t.episode_id) > 0; };

  int64_t rows = 0;
  std::array<double, env::kStateDim> mean{};
  double rtg_sum = 0.0;
  NormStats stats;
  stats.return_max = 0.0;
  double return_total = 0.0;
  int64_t episodes = 0;

  for (const auto& traj : dataset.trajectories) {
    if (!selected(traj)) continue;
    episodes += 1;
    const double ret = traj.rtg.empty() ? 0.0 : traj.rtg.front();
    stats.return_max = std::max(stats.return_max, ret);
    return_total += ret;
    for (int t = 0; t < traj.length(); ++t) {
      rows += 1;
      rtg_sum += traj.rtg[static_cast<size_t>(t)];
      for (int f = 0; f < env::kStateDim; ++f)
        mean[static_cast<size_t>(f)] += traj.states[static_cast<size_t>(t)][static_cast<size_t>(f)];
    }
  }
  if (rows == 0) throw ContractError("compute_norm_stats: no trajectories selected");

  for (auto& m : mean) m /= static_cast<double>(rows);
  const double rtg_mean = rtg_sum / static_cast<double>(rows);

  std::array<double, env::kStateDim> var{};
  double rtg_var = 0.0;
  for (const auto& traj : dataset.trajectories) {
    if (!selected(traj)) continue;
    for (int t = 0; t < traj.length(); ++t) {
      const double dr = traj.rtg[static_cast<size_t>(t)] - rtg_mean;
      rtg_var += dr * dr;
      for (int f = 0; f < env::kStateDim; ++f) {
        const double d =
            traj.states[static_cast<size_t>(t)][static_cast<size_t>(f)] - mean[static_cast<size_t>(f)];
        var[static_cast<size_t>(f)] += d * d;
      }
    }
  }

  for (int f = 0; f < env::kStateDim; ++f) {
    const double sd = std::sqrt(var[static_cast<size_t>(f)] / static_cast<double>(rows));
    if (sd > kZeroVarianceThreshold) {
      stats.state_mean[static_cast<size_t>(f)] = mean[static_cast<size_t>(f)];
      stats.state_scale[static_cast<size_t>(f)] = sd;
    }
    // else: pass through unscaled
  }
  const double rtg_sd = std::sqrt(rtg_var / static_cast<double>(rows));
  if (rtg_sd > kZeroVarianceThreshold) {
    stats.rtg_mean = rtg_mean;
    stats.rtg_scale = rtg_sd;
  }
  stats.return_mean = episodes > 0 ? return_total / static_cast<double>(episodes) : 0.0;
  return stats;
}

void apply_normalization(Dataset& dataset, const NormStats& stats) {
  for (auto& traj : dataset.trajectories) {
    for (auto& row : traj.states)
      for (int f = 0; f < env::kStateDim; ++f)
        row[static_cast<size_t>(f)] = stats.norm_state(f, row[static_cast<size_t>(f)]);
    for (auto& r : traj.rtg) r = stats.norm_rtg(r);
  }
}

NormStats normalize_features(Dataset& dataset, const std::vector<int64_t>& fit_episode_ids) {
  const NormStats stats = compute_norm_stats(dataset, fit_episode_ids);
  apply_normalization(dataset, stats);
  return stats;
}

}  // namespace autobid::data
