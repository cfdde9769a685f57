#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "autobid/trajectory.hpp"

namespace autobid::data {

// Z-normalization statistics, fit on the training split and stored with the
// checkpoint so evaluation applies the identical transform. Zero-variance
// dimensions pass through unscaled (mean 0, scale 1).
struct NormStats {
  std::array<double, env::kStateDim> state_mean{};
  std::array<double, env::kStateDim> state_scale{};
  double rtg_mean = 0.0;
  double rtg_scale = 1.0;
  // Return statistics of the fit split; used as the default rollout
  // conditioning target.
  double return_max = 0.0;
  double return_mean = 0.0;

  NormStats() {
    state_scale.fill(1.0);
  }

  double norm_state(int dim, double v) const {
    return (v - state_mean[static_cast<size_t>(dim)]) / state_scale[static_cast<size_t>(dim)];
  }
  double denorm_state(int dim, double v) const {
    return v * state_scale[static_cast<size_t>(dim)] + state_mean[static_cast<size_t>(dim)];
  }
  double norm_rtg(double v) const { return (v - rtg_mean) / rtg_scale; }
  double denorm_rtg(double v) const { return v * rtg_scale + rtg_mean; }
};

void to_json(nlohmann::json& j, const NormStats& s);
void from_json(const nlohmann::json& j, NormStats& s);

// Fit on the trajectories whose episode id appears in `episode_ids` (empty
// means the whole dataset).
NormStats compute_norm_stats(const Dataset& dataset, const std::vector<int64_t>& episode_ids);

// In-place state/RTG normalization of every trajectory.
void apply_normalization(Dataset& dataset, const NormStats& stats);

// Fit-then-apply; returns the stats for checkpointing.
NormStats normalize_features(Dataset& dataset, const std::vector<int64_t>& fit_episode_ids);

}  // namespace autobid::data
