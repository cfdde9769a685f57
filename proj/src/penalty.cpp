#include "autobid/penalty.hpp"

#include <algorithm>
#include <cmath>

#include "autobid/errors.hpp"

namespace autobid::loss {

std::string to_string(PenaltyMode mode) {
  return mode == PenaltyMode::literal ? "literal" : "clamped";
}

PenaltyMode penalty_mode_from_string(const std::string& s) {
  if (s == "literal") return PenaltyMode::literal;
  if (s == "clamped") return PenaltyMode::clamped;
  throw ConfigError(detail::msg("unknown penalty mode '", s, "' (expected literal|clamped)"));
}

void PenaltyConfig::validate() const {
  if (alpha1 <= 1.0) throw ConfigError(detail::msg("alpha1 must be > 1, got ", alpha1));
  if (alpha2 <= 1.0) throw ConfigError(detail::msg("alpha2 must be > 1, got ", alpha2));
  if (theta && *theta <= 0.0) throw ConfigError(detail::msg("theta must be > 0, got ", *theta));
}

double compute_cpa(const env::EpisodeLog& log) {
  return log.cumulative_value > 0.0 ? log.cumulative_cost / log.cumulative_value : 0.0;
}

double penalty_cpa(double cpa_terminal, double campaign_c, const PenaltyConfig& cfg) {
  if (campaign_c <= 0.0) throw DomainError(detail::msg("campaign C must be > 0, got ", campaign_c));
  const double theta = cfg.theta_for(campaign_c);
  // Strict indicator: cpa == theta is compliant.
  if (cpa_terminal > theta) return std::pow(cpa_terminal / campaign_c, cfg.alpha1);
  return 1.0;
}

double penalty_bc(const env::EpisodeLog& log, double budget, double alpha2) {
  if (budget <= 0.0) throw DomainError(detail::msg("budget must be > 0, got ", budget));
  const double bc = log.cumulative_cost / budget;
  return std::pow(bc, alpha2);
}

PenaltyBreakdown penalty_from_terminals(double cpa_terminal, double bc_terminal,
                                        double campaign_c, const PenaltyConfig& cfg) {
  cfg.validate();
  PenaltyBreakdown b;
  b.cpa_terminal = cpa_terminal;
  b.bc_terminal = bc_terminal;
  b.p_cpa = penalty_cpa(cpa_terminal, campaign_c, cfg);
  b.p_bc = std::pow(bc_terminal, cfg.alpha2);
  b.p_total = b.p_cpa * b.p_bc;
  b.mode = cfg.mode;
  if (cfg.mode == PenaltyMode::clamped) b.p_total = std::max(b.p_total, 1.0);
  return b;
}

PenaltyBreakdown total_penalty(const env::EpisodeLog& log, const env::CampaignConfig& campaign,
                               const PenaltyConfig& cfg) {
  const double bc = campaign.budget > 0.0 ? log.cumulative_cost / campaign.budget : 0.0;
  return penalty_from_terminals(compute_cpa(log), bc, campaign.cpa_threshold, cfg);
}

}  // namespace autobid::loss
