#pragma once

#include <string>
#include <vector>

#include "autobid/auction.hpp"

namespace autobid::env {

struct KpiConstraint {
  std::string name;
  double threshold = 0.0;  // C_j
};

struct ScoreConfig {
  double beta_exponent = 2.0;
  std::vector<KpiConstraint> kpi_constraints;

  // Standard single-KPI (CPA) configuration for a campaign.
  static ScoreConfig for_campaign(const CampaignConfig& cfg, double beta = 2.0);
  void validate() const;
};

struct KpiResult {
  std::string name;
  double cost_rate = 0.0;
  double penalty = 1.0;
};

struct ScoreReport {
  double score = 0.0;
  double total_value = 0.0;
  double total_cost = 0.0;
  double min_penalty = 1.0;
  std::vector<KpiResult> kpis;
};

// penalty_j = min((C_j / cost-rate_j)^beta, 1); score = total won value times
// the worst penalty. Zero won value scores 0 with penalty reported as 1.
ScoreReport compute_score(const EpisodeLog& log, const ScoreConfig& sc);

}  // namespace autobid::env
