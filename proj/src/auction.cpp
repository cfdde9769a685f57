#include "autobid/auction.hpp"

#include <cmath>
#include <memory>

#include "autobid/errors.hpp"
#include "autobid/rng.hpp"

namespace autobid::env {

void CampaignConfig::validate() const {
  if (budget < 0.0) throw ConfigError(detail::msg("budget must be >= 0, got ", budget));
  if (cpa_threshold <= 0.0)
    throw ConfigError(detail::msg("cpa_threshold must be > 0, got ", cpa_threshold));
  if (horizon < 1) throw ConfigError(detail::msg("horizon must be >= 1, got ", horizon));
  if (impressions_per_step < 1)
    throw ConfigError(detail::msg("impressions_per_step must be >= 1, got ", impressions_per_step));
  if (value_scale < 0.0 || competition_scale < 0.0)
    throw ConfigError("distribution scales must be >= 0");
}

double bid_from_action(double lambda_t, double value) {
  if (lambda_t < 0.0 || !std::isfinite(lambda_t))
    throw DomainError(detail::msg("bid_from_action: lambda must be finite and >= 0, got ", lambda_t));
  if (value < 0.0 || !std::isfinite(value))
    throw DomainError(detail::msg("bid_from_action: value must be finite and >= 0, got ", value));
  return lambda_t * value;
}

AuctionOutcome run_gsp_auction(double bid, const ImpressionOpportunity& opp) {
  if (bid < 0.0 || !std::isfinite(bid))
    throw DomainError(detail::msg("run_gsp_auction: bid must be finite and >= 0, got ", bid));
  AuctionOutcome out;
  out.won = bid > opp.competing_bid;  // strict: ties lose
  out.cost = out.won ? opp.competing_bid : 0.0;
  out.realized_value = out.won ? opp.value : 0.0;
  return out;
}

std::array<double, kStateDim> compute_state_features(const EpisodeLog& log, int t) {
  const int horizon = log.campaign.horizon;
  if (t < 0 || t > horizon)
    throw IndexError(detail::msg("compute_state_features: step ", t, " outside [0,", horizon, "]"));

  double spent = 0.0, value = 0.0;
  for (int k = 0; k < t; ++k) {
    spent += log.steps[static_cast<size_t>(k)].cost;
    value += log.steps[static_cast<size_t>(k)].reward;
  }

  std::array<double, kStateDim> s{};
  s[0] = log.campaign.budget - spent;
  s[1] = static_cast<double>(horizon - t) / horizon;
  if (t > 0) {
    const StepLog& last = log.steps[static_cast<size_t>(t - 1)];
    const int faced = static_cast<int>(last.impressions.size());
    s[2] = faced > 0 ? static_cast<double>(last.wins) / faced : 0.0;
    s[3] = last.wins > 0 ? last.cost / last.wins : 0.0;
    s[6] = last.action;
  }
  s[4] = value > 0.0 ? spent / value : 0.0;
  s[5] = log.campaign.budget > 0.0 ? spent / log.campaign.budget : 0.0;
  return s;
}

EpisodeLog simulate_episode(const Policy& policy, const CampaignConfig& cfg, int64_t episode_id) {
  cfg.validate();
  EpisodeLog log;
  log.campaign = cfg;
  log.episode_id = episode_id;
  log.steps.reserve(static_cast<size_t>(cfg.horizon));

  Rng rng(derive_seed(cfg.rng_seed, static_cast<uint64_t>(episode_id), 0x415543ull));

  for (int t = 0; t < cfg.horizon; ++t) {
    const double lambda_t = policy(log, t);
    if (std::isnan(lambda_t))
      throw PolicyError(detail::msg("policy returned NaN at step ", t, "; episode aborted"));
    if (lambda_t < 0.0 || !std::isfinite(lambda_t))
      throw PolicyError(detail::msg("policy returned invalid action ", lambda_t, " at step ", t));

    StepLog step;
    step.action = lambda_t;
    step.impressions.reserve(static_cast<size_t>(cfg.impressions_per_step));
    step.outcomes.reserve(static_cast<size_t>(cfg.impressions_per_step));

    for (int i = 0; i < cfg.impressions_per_step; ++i) {
      ImpressionOpportunity opp;
      opp.value = rng.lognormal(cfg.value_location, cfg.value_scale);
      opp.competing_bid = rng.lognormal(cfg.competition_location, cfg.competition_scale);

      AuctionOutcome out = run_gsp_auction(bid_from_action(lambda_t, opp.value), opp);
      // Budget gate: force-lose anything the remaining budget cannot cover.
      if (out.won && log.cumulative_cost + out.cost > cfg.budget) out = AuctionOutcome{};

      if (out.won) {
        log.cumulative_cost += out.cost;
        log.cumulative_value += out.realized_value;
        step.cost += out.cost;
        step.reward += out.realized_value;
        step.wins += 1;
      }
      step.impressions.push_back(opp);
      step.outcomes.push_back(out);
    }
    log.steps.push_back(std::move(step));
  }
  return log;
}

std::vector<LinearPolicySpec> default_policy_mixture() {
  // Spans heavy under-bidding through heavy over-bidding so that both
  // penalty regimes occur in generated data.
  return {
      {0.10, 0.00, 0.02}, {0.30, 0.10, 0.05}, {0.60, 0.20, 0.05}, {1.00, 0.25, 0.10},
      {1.50, 0.50, 0.10}, {2.50, 0.75, 0.15}, {4.00, 1.00, 0.20},
  };
}

EpisodeLog simulate_mixture_episode(const CampaignConfig& cfg,
                                    const std::vector<LinearPolicySpec>& mixture,
                                    int64_t episode_id) {
  if (mixture.empty()) throw ConfigError("policy mixture must not be empty");
  const LinearPolicySpec spec = mixture[static_cast<size_t>(episode_id) % mixture.size()];
  auto noise_rng = std::make_shared<Rng>(
      derive_seed(cfg.rng_seed, static_cast<uint64_t>(episode_id), 0x504f4cull));
  const double base = spec.lambda0 + spec.lambda1 * cfg.cpa_threshold;

  Policy policy = [spec, base, noise_rng](const EpisodeLog&, int) {
    const double lambda = base + noise_rng->normal(0.0, spec.noise_scale);
    return lambda > 0.0 ? lambda : 0.0;
  };

  CampaignConfig episode_cfg = cfg;
  return simulate_episode(policy, episode_cfg, episode_id);
}

std::vector<EpisodeLog> generate_synthetic_dataset(const CampaignConfig& cfg, int num_episodes,
                                                   const std::vector<LinearPolicySpec>& mixture) {
  if (num_episodes < 1) throw ConfigError(detail::msg("num_episodes must be >= 1, got ", num_episodes));
  if (mixture.empty()) throw ConfigError("policy mixture must not be empty");
  std::vector<EpisodeLog> episodes;
  episodes.reserve(static_cast<size_t>(num_episodes));
  for (int i = 0; i < num_episodes; ++i)
    episodes.push_back(simulate_mixture_episode(cfg, mixture, i));
  return episodes;
}

}  // namespace autobid::env
