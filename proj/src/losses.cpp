#include "autobid/losses.hpp"

#include "autobid/errors.hpp"

namespace autobid::loss {

using nn::Tensor;

void LossConfig::validate() const {
  if (rtg_weight <= 0.0) throw ConfigError(detail::msg("rtg_weight must be > 0, got ", rtg_weight));
}

Tensor weighted_mse(const Tensor& pred, const std::vector<double>& target,
                    const std::vector<double>& penalties, const std::vector<uint8_t>& mask) {
  const auto n = static_cast<size_t>(pred.size());
  if (target.size() != n || penalties.size() != n || mask.size() != n)
    throw DimensionError(detail::msg("weighted_mse: pred has ", n, " entries, target/penalties/mask have ",
                                     target.size(), "/", penalties.size(), "/", mask.size()));
  int64_t valid = 0;
  for (uint8_t m : mask) valid += m ? 1 : 0;
  if (valid == 0) throw ContractError("weighted_mse: every position is masked out");

  // Fold penalty, mask and 1/N into one constant weight tensor, so the graph
  // is a plain weighted sum of squares.
  std::vector<double> weights(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    if (mask[i]) weights[i] = penalties[i] / static_cast<double>(valid);

  Tensor target_t = Tensor::from_values(pred.shape(), std::vector<double>(target));
  Tensor weight_t = Tensor::from_values(pred.shape(), std::move(weights));
  Tensor diff = nn::sub(pred, target_t);
  return nn::sum_all(nn::mul(nn::mul(diff, diff), weight_t));
}

Tensor action_loss(const Tensor& pred_actions, const std::vector<double>& target_actions,
                   const std::vector<double>& penalties, const std::vector<uint8_t>& mask) {
  return weighted_mse(pred_actions, target_actions, penalties, mask);
}

Tensor rtg_loss(const Tensor& pred_rtg, const std::vector<double>& target_rtg,
                const std::vector<double>& penalties, const std::vector<uint8_t>& mask) {
  return weighted_mse(pred_rtg, target_rtg, penalties, mask);
}

Tensor total_loss(const Tensor& l_action, const Tensor& l_rtg, const LossConfig& cfg) {
  cfg.validate();
  return nn::add(l_action, nn::scale(l_rtg, cfg.rtg_weight));
}

}  // namespace autobid::loss
