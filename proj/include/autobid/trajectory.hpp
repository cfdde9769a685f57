#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "autobid/auction.hpp"
#include "autobid/penalty.hpp"

namespace autobid::data {

// Campaign constants a trajectory was generated under (the dataset header
// fields).
struct CampaignSummary {
  double budget = 0.0;
  double cpa_threshold = 0.0;
  int horizon = 0;
  uint64_t seed = 0;
};

struct TerminalStats {
  double cpa = 0.0;      // CPA_T
  double bc = 0.0;       // BC_T
  double p_total = 0.0;  // penalty under `mode`
  loss::PenaltyMode mode = loss::PenaltyMode::literal;
};

// Model-ready view of one episode: per-step state/action/reward/RTG plus the
// terminal statistics the constraint loss weights by.
struct Trajectory {
  int64_t episode_id = 0;
  CampaignSummary campaign;
  std::vector<std::array<double, env::kStateDim>> states;  // T rows
  std::vector<double> actions;
  std::vector<double> rewards;
  std::vector<double> rtg;
  std::vector<double> cum_cost;   // running spend through step t
  std::vector<double> cum_value;  // running value through step t
  TerminalStats terminal;

  int length() const { return static_cast<int>(actions.size()); }
};

struct Dataset {
  std::vector<Trajectory> trajectories;
};

// Suffix sums: rtg[t] = sum_{k>=t} rewards[k].
std::vector<double> compute_rtg(const std::vector<double>& rewards);

Trajectory trajectory_from_episode(const env::EpisodeLog& log, const loss::PenaltyConfig& penalty_cfg);

// Re-derives each trajectory's penalty from its stored terminal CPA/BC under
// a (possibly different) penalty configuration.
void recompute_penalties(Dataset& dataset, const loss::PenaltyConfig& penalty_cfg);

// Fixed-length training window ending at one step. Positions before the
// episode start are zero-filled and masked invalid; valid data is
// right-aligned so the most recent step is always the last row.
struct TrainingSegment {
  int64_t episode_id = 0;
  int end_step = 0;
  int valid_count = 0;               // attention length
  std::vector<int> timesteps;        // M, zeros at padding
  std::vector<double> states;        // M x kStateDim, row-major
  std::vector<double> actions;       // a_t at each position (prediction target)
  std::vector<double> prev_actions;  // a_{t-1} at each position, 0 before start
  std::vector<double> rtg;
  std::vector<uint8_t> valid;  // M
  double penalty = 1.0;        // trajectory-terminal P, shared by all positions
};

// One segment per step t in [0, T); window length exactly M.
std::vector<TrainingSegment> build_segments(const Trajectory& traj, int window);

std::vector<TrainingSegment> build_segments(const Dataset& dataset, int window);

}  // namespace autobid::data
