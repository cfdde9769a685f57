#pragma once

#include <cstdint>
#include <vector>

#include "autobid/tensor.hpp"

namespace autobid::loss {

struct LossConfig {
  double rtg_weight = 10.0;  // lambda in the total objective

  void validate() const;
};

// Penalty-weighted masked MSE: (1/N) * sum_n P_n (pred_n - target_n)^2 over
// valid positions, N = number of valid positions. `penalties` and `mask`
// are flat and aligned with pred/target. Differentiable w.r.t. pred.
nn::Tensor weighted_mse(const nn::Tensor& pred, const std::vector<double>& target,
                        const std::vector<double>& penalties, const std::vector<uint8_t>& mask);

nn::Tensor action_loss(const nn::Tensor& pred_actions, const std::vector<double>& target_actions,
                       const std::vector<double>& penalties, const std::vector<uint8_t>& mask);

nn::Tensor rtg_loss(const nn::Tensor& pred_rtg, const std::vector<double>& target_rtg,
                    const std::vector<double>& penalties, const std::vector<uint8_t>& mask);

// L_a + lambda * L_r.
nn::Tensor total_loss(const nn::Tensor& l_action, const nn::Tensor& l_rtg, const LossConfig& cfg);

}  // namespace autobid::loss
