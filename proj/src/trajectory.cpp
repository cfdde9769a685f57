#include "autobid/trajectory.hpp"

#include "autobid/errors.hpp"

namespace autobid::data {

std::vector<double> compute_rtg(const std::vector<double>& rewards) {
  if (rewards.empty()) throw DimensionError("compute_rtg: rewards must be nonempty");
  std::vector<double> rtg(rewards.size());
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    rtg[i] = acc;
  }
  return rtg;
}

Trajectory trajectory_from_episode(const env::EpisodeLog& log, const loss::PenaltyConfig& penalty_cfg) {
  Trajectory traj;
  traj.episode_id = log.episode_id;
  traj.campaign = {log.campaign.budget, log.campaign.cpa_threshold, log.campaign.horizon,
                   log.campaign.rng_seed};

  const int t_len = static_cast<int>(log.steps.size());
  traj.states.reserve(static_cast<size_t>(t_len));
  traj.actions.reserve(static_cast<size_t>(t_len));
  traj.rewards.reserve(static_cast<size_t>(t_len));
  traj.cum_cost.reserve(static_cast<size_t>(t_len));
  traj.cum_value.reserve(static_cast<size_t>(t_len));

  double spend = 0.0, value = 0.0;
  for (int t = 0; t < t_len; ++t) {
    traj.states.push_back(env::compute_state_features(log, t));
    const auto& step = log.steps[static_cast<size_t>(t)];
    traj.actions.push_back(step.action);
    traj.rewards.push_back(step.reward);
    spend += step.cost;
    value += step.reward;
    traj.cum_cost.push_back(spend);
    traj.cum_value.push_back(value);
  }
  traj.rtg = compute_rtg(traj.rewards);

  const auto breakdown = loss::total_penalty(log, log.campaign, penalty_cfg);
  traj.terminal = {breakdown.cpa_terminal, breakdown.bc_terminal, breakdown.p_total, breakdown.mode};
  return traj;
}

void recompute_penalties(Dataset& dataset, const loss::PenaltyConfig& penalty_cfg) {
  for (auto& traj : dataset.trajectories) {
    const auto breakdown = loss::penalty_from_terminals(traj.terminal.cpa, traj.terminal.bc,
                                                        traj.campaign.cpa_threshold, penalty_cfg);
    traj.terminal.p_total = breakdown.p_total;
    traj.terminal.mode = breakdown.mode;
  }
}

std::vector<TrainingSegment> build_segments(const Trajectory& traj, int window) {
  if (window < 1) throw ConfigError(detail::msg("segment window must be >= 1, got ", window));
  const int t_len = traj.length();
  std::vector<TrainingSegment> segments;
  segments.reserve(static_cast<size_t>(t_len));

  for (int end = 0; end < t_len; ++end) {
    TrainingSegment seg;
    seg.episode_id = traj.episode_id;
    seg.end_step = end;
    seg.penalty = traj.terminal.p_total;
    seg.timesteps.assign(static_cast<size_t>(window), 0);
    seg.states.assign(static_cast<size_t>(window) * env::kStateDim, 0.0);
    seg.actions.assign(static_cast<size_t>(window), 0.0);
    seg.prev_actions.assign(static_cast<size_t>(window), 0.0);
    seg.rtg.assign(static_cast<size_t>(window), 0.0);
    seg.valid.assign(static_cast<size_t>(window), 0);

    for (int pos = 0; pos < window; ++pos) {
      const int step = end - window + 1 + pos;
      if (step < 0) continue;  // left padding
      const auto p = static_cast<size_t>(pos);
      const auto s = static_cast<size_t>(step);
      seg.timesteps[p] = step;
      seg.actions[p] = traj.actions[s];
      seg.prev_actions[p] = step > 0 ? traj.actions[s - 1] : 0.0;
      seg.rtg[p] = traj.rtg[s];
      for (int f = 0; f < env::kStateDim; ++f)
        seg.states[p * env::kStateDim + static_cast<size_t>(f)] = traj.states[s][static_cast<size_t>(f)];
      seg.valid[p] = 1;
      seg.valid_count += 1;
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<TrainingSegment> build_segments(const Dataset& dataset, int window) {
  std::vector<TrainingSegment> all;
  for (const auto& traj : dataset.trajectories) {
    auto segs = build_segments(traj, window);
    all.insert(all.end(), std::make_move_iterator(segs.begin()), std::make_move_iterator(segs.end()));
  }
  return all;
}

}  // namespace autobid::data
