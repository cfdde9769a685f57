#pragma once

#include <optional>
#include <string>

#include "autobid/auction.hpp"

namespace autobid::loss {

enum class PenaltyMode { literal, clamped };

std::string to_string(PenaltyMode mode);
PenaltyMode penalty_mode_from_string(const std::string& s);

struct PenaltyConfig {
  double alpha1 = 2.0;  // CPA penalty exponent
  double alpha2 = 2.0;  // budget-consumption penalty exponent
  // CPA threshold theta; unset means "use the campaign's C".
  std::optional<double> theta;
  PenaltyMode mode = PenaltyMode::literal;

  void validate() const;
  double theta_for(double campaign_c) const { return theta.value_or(campaign_c); }
};

struct PenaltyBreakdown {
  double cpa_terminal = 0.0;   // CPA_T
  double bc_terminal = 0.0;    // BC_T in [0,1]
  double p_cpa = 1.0;          // >= 1
  double p_bc = 0.0;           // in [0,1]
  double p_total = 0.0;        // p_cpa * p_bc, floored at 1 in clamped mode
  PenaltyMode mode = PenaltyMode::literal;
};

// Terminal CPA over the whole episode; 0 when nothing was won (no
// conversions means no CPA violation).
double compute_cpa(const env::EpisodeLog& log);

// (cpa / C)^alpha1 when cpa exceeds theta (strict), else 1.
double penalty_cpa(double cpa_terminal, double campaign_c, const PenaltyConfig& cfg);

// (spend / B)^alpha2, taken literally.
double penalty_bc(const env::EpisodeLog& log, double budget, double alpha2);

PenaltyBreakdown total_penalty(const env::EpisodeLog& log, const env::CampaignConfig& campaign,
                               const PenaltyConfig& cfg);

// Recomputes the breakdown from stored terminal statistics (dataset path).
PenaltyBreakdown penalty_from_terminals(double cpa_terminal, double bc_terminal,
                                        double campaign_c, const PenaltyConfig& cfg);

}  // namespace autobid::loss
