#include "autobid/param_store.hpp"

#include <cmath>

#include "autobid/errors.hpp"

namespace autobid::nn {

Tensor ParamStore::create(const std::string& name, Shape shape) {
  return create(name, shape, std::vector<double>(static_cast<size_t>(numel(shape)), 0.0));
}

Tensor ParamStore::create(const std::string& name, Shape shape, std::vector<double> values) {
  if (index_.count(name))
    throw ContractError(detail::msg("parameter '", name, "' already registered"));
  ParamEntry entry;
  entry.name = name;
  entry.tensor = Tensor::from_values(std::move(shape), std::move(values), /*requires_grad=*/true);
  entry.m.assign(static_cast<size_t>(entry.tensor.size()), 0.0);
  entry.v.assign(static_cast<size_t>(entry.tensor.size()), 0.0);
  index_[name] = entries_.size();
  entries_.push_back(std::move(entry));
  return entries_.back().tensor;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) > 0; }

Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError(detail::msg("unknown parameter '", name, "'"));
  return entries_[it->second].tensor;
}

int64_t ParamStore::total_values() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

void adamw_step(ParamStore& params, const AdamwConfig& cfg) {
  for (auto& entry : params.entries_mut()) {
    if (!entry.tensor.has_grad())
      throw ContractError(detail::msg("adamw_step: parameter '", entry.name, "' has no gradient"));

    entry.steps += 1;
    const double t = static_cast<double>(entry.steps);
    // Rate with folded bias correction; eps sits next to the uncorrected
    // second moment.
    const double step_size =
        cfg.learning_rate * std::sqrt(1.0 - std::pow(cfg.beta2, t)) / (1.0 - std::pow(cfg.beta1, t));

    auto vals = entry.tensor.values_mut();
    auto grads = entry.tensor.grad_mut();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double g = grads[i];
      entry.m[i] = cfg.beta1 * entry.m[i] + (1.0 - cfg.beta1) * g;
      entry.v[i] = cfg.beta2 * entry.v[i] + (1.0 - cfg.beta2) * g * g;
      // Decoupled decay acts on the parameter directly, not through the
      // gradient.
      vals[i] -= cfg.learning_rate * cfg.weight_decay * vals[i];
      vals[i] -= step_size * entry.m[i] / (std::sqrt(entry.v[i]) + cfg.eps);
      if (!std::isfinite(vals[i]))
        throw NumericError(detail::msg("adamw_step: parameter '", entry.name,
                                       "' became non-finite at flat index ", i));
    }
    entry.tensor.zero_grad();
  }
}

}  // namespace autobid::nn
