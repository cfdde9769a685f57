#include "autobid/score.hpp"

#include <algorithm>
#include <cmath>

#include "autobid/errors.hpp"

namespace autobid::env {

ScoreConfig ScoreConfig::for_campaign(const CampaignConfig& cfg, double beta) {
  ScoreConfig sc;
  sc.beta_exponent = beta;
  sc.kpi_constraints = {{"CPA", cfg.cpa_threshold}};
  return sc;
}

void ScoreConfig::validate() const {
  if (beta_exponent <= 0.0)
    throw ConfigError(detail::msg("beta_exponent must be > 0, got ", beta_exponent));
  if (kpi_constraints.empty()) throw ConfigError("score config needs at least one KPI constraint");
  for (const auto& kpi : kpi_constraints)
    if (kpi.threshold <= 0.0)
      throw ConfigError(detail::msg("KPI '", kpi.name, "' threshold must be > 0"));
}

ScoreReport compute_score(const EpisodeLog& log, const ScoreConfig& sc) {
  sc.validate();
  ScoreReport report;
  report.total_cost = log.cumulative_cost;
  report.total_value = log.cumulative_value;

  for (const auto& kpi : sc.kpi_constraints) {
    KpiResult result;
    result.name = kpi.name;
    if (report.total_value > 0.0) {
      result.cost_rate = report.total_cost / report.total_value;
      result.penalty = result.cost_rate > 0.0
                           ? std::min(std::pow(kpi.threshold / result.cost_rate, sc.beta_exponent), 1.0)
                           : 1.0;
    } else {
      result.cost_rate = 0.0;
      result.penalty = 1.0;  // degenerate zero-conversion case; score is 0 anyway
    }
    report.kpis.push_back(result);
    report.min_penalty = std::min(report.min_penalty, result.penalty);
  }

  report.score = report.total_value > 0.0 ? report.total_value * report.min_penalty : 0.0;
  return report;
}

}  // namespace autobid::env
