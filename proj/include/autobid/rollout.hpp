#pragma once

#include "autobid/auction.hpp"
#include "autobid/model.hpp"

namespace autobid::model {

// Autoregressive policy over a sliding window of the last M steps. The
// conditioning RTG starts at target_rtg and decays by realized reward,
// floored at 0; inputs are normalized with the stored stats; the predicted
// action is clamped at 0. `cond_trace`, when given, receives the raw
// conditioning RTG used at each step.
env::Policy make_model_policy(nn::ParamStore& params, const ModelConfig& cfg,
                              const data::NormStats& stats, double target_rtg,
                              std::vector<double>* cond_trace = nullptr);

env::EpisodeLog rollout_inference(nn::ParamStore& params, const ModelConfig& cfg,
                                  const data::NormStats& stats, const env::CampaignConfig& campaign,
                                  double target_rtg, int64_t episode_id = 0);

}  // namespace autobid::model
