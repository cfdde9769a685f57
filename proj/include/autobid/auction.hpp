#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace autobid::env {

// Number of state features produced by compute_state_features.
inline constexpr int kStateDim = 7;

struct CampaignConfig {
  double budget = 2500.0;          // B
  double cpa_threshold = 1.0;      // C
  int horizon = 48;                // decision steps T
  int impressions_per_step = 200;
  // Per-impression draws, both log-normal.
  double value_location = 0.0;
  double value_scale = 0.5;
  double competition_location = 0.1;
  double competition_scale = 0.6;
  uint64_t rng_seed = 1;

  void validate() const;
};

struct ImpressionOpportunity {
  double value = 0.0;          // expected conversion value v_i
  double competing_bid = 0.0;  // highest competing bid b_i^-
};

struct AuctionOutcome {
  bool won = false;
  double cost = 0.0;            // competing bid when won, else 0
  double realized_value = 0.0;  // v_i when won, else 0
};

struct StepLog {
  double action = 0.0;  // lambda_t
  std::vector<ImpressionOpportunity> impressions;
  std::vector<AuctionOutcome> outcomes;
  double reward = 0.0;  // sum of realized value this step
  double cost = 0.0;
  int wins = 0;
};

struct EpisodeLog {
  CampaignConfig campaign;
  int64_t episode_id = 0;
  std::vector<StepLog> steps;
  double cumulative_cost = 0.0;
  double cumulative_value = 0.0;
};

// lambda_t = policy(log-so-far, t); steps [0, t) of the log are complete.
using Policy = std::function<double(const EpisodeLog&, int)>;

// b = lambda_t * v_i.
double bid_from_action(double lambda_t, double value);

// Strict-inequality GSP: win iff bid > competing bid; winner pays the
// competing bid, a tie loses.
AuctionOutcome run_gsp_auction(double bid, const ImpressionOpportunity& opp);

// State vector before acting at step t, recomputable from the log alone:
// [remaining budget, remaining steps fraction, last-step win rate,
//  last-step average winning cost, cumulative cost-rate, budget consumption
//  fraction, previous action].
std::array<double, kStateDim> compute_state_features(const EpisodeLog& log, int t);

// Rolls a policy through T steps of impression auctions. An impression whose
// cost would push spend above the budget is force-lost (budget gate), so
// cumulative cost never exceeds B.
EpisodeLog simulate_episode(const Policy& policy, const CampaignConfig& cfg,
                            int64_t episode_id = 0);

// lambda_t = lambda0 + lambda1 * C + noise, clamped at 0.
struct LinearPolicySpec {
  double lambda0 = 1.0;
  double lambda1 = 0.0;
  double noise_scale = 0.0;
};

// Mixture spanning under-, near- and over-bidding behavior.
std::vector<LinearPolicySpec> default_policy_mixture();

// Episode i uses mixture[i % size] with a seed-split noise stream.
EpisodeLog simulate_mixture_episode(const CampaignConfig& cfg,
                                    const std::vector<LinearPolicySpec>& mixture,
                                    int64_t episode_id);

std::vector<EpisodeLog> generate_synthetic_dataset(const CampaignConfig& cfg, int num_episodes,
                                                   const std::vector<LinearPolicySpec>& mixture);

}  // namespace autobid::env
