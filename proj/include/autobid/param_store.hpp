#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "autobid/tensor.hpp"

namespace autobid::nn {

struct AdamwConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Named parameter tensor plus its optimizer state.
struct ParamEntry {
  std::string name;
  Tensor tensor;
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  int64_t steps = 0;
};

// Ordered map of trainable parameters. Iteration order is creation order,
// which fixes the checkpoint layout.
class ParamStore {
 public:
  // Creates a zero-initialized parameter; name must be unique.
  Tensor create(const std::string& name, Shape shape);
  Tensor create(const std::string& name, Shape shape, std::vector<double> values);

  bool contains(const std::string& name) const;
  Tensor get(const std::string& name) const;

  size_t count() const { return entries_.size(); }
  int64_t total_values() const;
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::vector<ParamEntry>& entries_mut() { return entries_; }

  void zero_grads();

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// One decoupled-weight-decay Adam step over every parameter in the store.
// Requires a populated gradient on each parameter; zeroes gradients after
// applying the update.
void adamw_step(ParamStore& params, const AdamwConfig& cfg);

}  // namespace autobid::nn
