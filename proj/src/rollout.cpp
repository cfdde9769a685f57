#include "autobid/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "autobid/errors.hpp"

namespace autobid::model {

namespace {

struct RolloutState {
  std::vector<std::array<double, env::kStateDim>> states;  // raw features, one per acted step
  std::vector<double> cond_rtg;                            // conditioning value used at each step
};

}  // namespace

env::Policy make_model_policy(nn::ParamStore& params, const ModelConfig& cfg,
                              const data::NormStats& stats, double target_rtg,
                              std::vector<double>* cond_trace) {
  if (target_rtg < 0.0 || !std::isfinite(target_rtg))
    throw DomainError(detail::msg("target_rtg must be finite and >= 0, got ", target_rtg));
  auto state = std::make_shared<RolloutState>();

  return [&params, cfg, stats, target_rtg, state, cond_trace](const env::EpisodeLog& log, int t) {
    const int m = cfg.window;
    const auto current = env::compute_state_features(log, t);
    const double current_rtg = std::max(target_rtg - log.cumulative_value, 0.0);

    data::TrainingSegment seg;
    seg.end_step = t;
    seg.timesteps.assign(static_cast<size_t>(m), 0);
    seg.states.assign(static_cast<size_t>(m) * env::kStateDim, 0.0);
    seg.actions.assign(static_cast<size_t>(m), 0.0);
    seg.prev_actions.assign(static_cast<size_t>(m), 0.0);
    seg.rtg.assign(static_cast<size_t>(m), 0.0);
    seg.valid.assign(static_cast<size_t>(m), 0);

    for (int p = 0; p < m; ++p) {
      const int step = t - m + 1 + p;
      if (step < 0) continue;
      const auto pp = static_cast<size_t>(p);
      const auto sp = static_cast<size_t>(step);
      seg.valid[pp] = 1;
      seg.valid_count += 1;
      seg.timesteps[pp] = step;
      const auto& feat = step < t ? state->states[sp] : current;
      for (int f = 0; f < env::kStateDim; ++f)
        seg.states[pp * env::kStateDim + static_cast<size_t>(f)] = feat[static_cast<size_t>(f)];
      seg.rtg[pp] = step < t ? state->cond_rtg[sp] : current_rtg;
      // The action for the current step is the unknown being predicted; its
      // slot stays 0 and the token mask keeps it unseen.
      seg.actions[pp] = step < t ? log.steps[sp].action : 0.0;
      seg.prev_actions[pp] = step > 0 ? log.steps[sp - 1].action : 0.0;
    }

    double predicted = 0.0;
    try {
      nn::NoGradGuard no_grad;
      SegmentBatch batch = make_batch({&seg}, stats, cfg);
      ForwardResult out = model_forward(batch, params, cfg, /*training=*/false, nullptr);
      predicted = out.pred_actions.values()[static_cast<size_t>(m - 1)];
    } catch (const NumericError& e) {
      throw InferenceError(detail::msg("non-finite model output at step ", t, ": ", e.what()));
    }
    if (!std::isfinite(predicted))
      throw InferenceError(detail::msg("non-finite action prediction at step ", t));

    const double action = std::max(predicted, 0.0);
    state->states.push_back(current);
    state->cond_rtg.push_back(current_rtg);
    if (cond_trace) cond_trace->push_back(current_rtg);
    return action;
  };
}

env::EpisodeLog rollout_inference(nn::ParamStore& params, const ModelConfig& cfg,
                                  const data::NormStats& stats, const env::CampaignConfig& campaign,
                                  double target_rtg, int64_t episode_id) {
  env::Policy policy = make_model_policy(params, cfg, stats, target_rtg);
  return env::simulate_episode(policy, campaign, episode_id);
}

}  // namespace autobid::model
