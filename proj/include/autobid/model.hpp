#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autobid/normalize.hpp"
#include "autobid/param_store.hpp"
#include "autobid/tensor.hpp"
#include "autobid/trajectory.hpp"

namespace autobid::model {

enum class Variant { clb_dt, vanilla_dt };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Which final-block stream feeds each prediction head.
enum class ActionHeadStream { state, action };
enum class RtgHeadStream { state, rtg };

struct ModelConfig {
  int hidden_dim = 64;  // d_h
  int attn_dim = 0;     // d_k; 0 derives d_h (the residual form requires d_k == d_h)
  int ff_dim = 0;       // 0 derives 4 * d_h
  int num_blocks = 3;
  int window = 20;  // M
  int horizon = 48;
  double dropout_rate = 0.1;
  double mask_fill = -1e4;
  double layer_norm_eps = 1e-5;
  Variant variant = Variant::clb_dt;
  ActionHeadStream action_head = ActionHeadStream::state;
  RtgHeadStream rtg_head = RtgHeadStream::state;

  int d_k() const { return attn_dim > 0 ? attn_dim : hidden_dim; }
  int d_ff() const { return ff_dim > 0 ? ff_dim : 4 * hidden_dim; }
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

// Registers every parameter for the configured variant under deterministic
// names; weights drawn from N(0, 1/sqrt(fan_in)), LN at identity, head
// weights scaled by 0.1.
void init_params(nn::ParamStore& store, const ModelConfig& cfg, uint64_t seed);

// Assembled batch of training segments: padded positions keep exact zeros,
// states and RTG are normalized, targets sit alongside as plain arrays.
struct SegmentBatch {
  int batch = 0;
  int window = 0;
  std::vector<int> timesteps;   // B*M
  nn::Tensor states;            // [B,M,d_s]
  nn::Tensor actions;           // [B,M,1] same-step actions (vanilla token input)
  nn::Tensor prev_actions;      // [B,M,1] previous-step actions (CLB action stream)
  nn::Tensor rtg;               // [B,M,1] normalized
  std::vector<uint8_t> valid;   // B*M
  std::vector<double> target_actions;  // B*M
  std::vector<double> target_rtg;      // B*M normalized
  std::vector<double> penalties;       // B*M, per-position copy of the segment penalty
};

SegmentBatch make_batch(const std::vector<const data::TrainingSegment*>& segments,
                        const data::NormStats& stats, const ModelConfig& cfg);

// [B,M,M] additive mask: 0 where position i may attend j (j <= i, both
// valid), mask_fill elsewhere.
nn::Tensor causal_mask(const std::vector<uint8_t>& valid, int batch, int window, double mask_fill);
// Token-level mask for the interleaved (r,s,a) sequence: [B,3M,3M].
nn::Tensor token_causal_mask(const std::vector<uint8_t>& valid, int batch, int window,
                             double mask_fill);

struct EncodedStreams {
  nn::Tensor s, a, r;  // each [B,M,d_h]
};

// Sequence-specific linear encodings plus a shared learned timestep
// embedding added to all three streams.
EncodedStreams encode_inputs(const std::vector<int>& timesteps, const nn::Tensor& states,
                             const nn::Tensor& actions, const nn::Tensor& rtg,
                             nn::ParamStore& params, const ModelConfig& cfg);

struct AttnPath {
  nn::Tensor wq, bq, wk, bk, wv, bv;
};

// Q from x_stream, K and V from y_stream; softmax(QK^T/sqrt(d_k) + mask) V.
nn::Tensor masked_cross_attention(const nn::Tensor& x_stream, const nn::Tensor& y_stream,
                                  const AttnPath& path, const nn::Tensor& mask, int d_k);

struct LnSite {
  nn::Tensor gamma, beta;
};
struct FfParams {
  nn::Tensor w1, b1, w2, b2;
};
// One stream's slice of a cross-learning block: two attention paths (keys
// and values from this stream, queries from each of the other two).
struct StreamBlockParams {
  LnSite ln_attn, ln_ff;
  AttnPath from_first, from_second;  // q-sources in fixed (s,a,r)-minus-self order
  FfParams ff;
};
struct ClbParams {
  StreamBlockParams s, a, r;
};

ClbParams fetch_clb_params(nn::ParamStore& store, int block_index);

struct StreamTriple {
  nn::Tensor s, a, r;
};

// One cross-learning block update of all three streams.
StreamTriple clb_forward(const StreamTriple& in, const ClbParams& block, const nn::Tensor& mask,
                         const ModelConfig& cfg, bool training, Rng* dropout_rng);

struct ForwardResult {
  nn::Tensor pred_actions;  // [B,M]
  nn::Tensor pred_rtg;      // [B,M] (normalized scale)
};

// Full forward pass for the configured variant.
ForwardResult model_forward(const SegmentBatch& batch, nn::ParamStore& params,
                            const ModelConfig& cfg, bool training, Rng* dropout_rng);

ForwardResult clb_dt_forward(const SegmentBatch& batch, nn::ParamStore& params,
                             const ModelConfig& cfg, bool training, Rng* dropout_rng);
ForwardResult vanilla_dt_forward(const SegmentBatch& batch, nn::ParamStore& params,
                                 const ModelConfig& cfg, bool training, Rng* dropout_rng);

// Final-position hidden state(s) after the first block: concatenated
// (s,a,r) rows for clb_dt (3*d_h), the final token row for vanilla_dt (d_h).
std::vector<double> extract_block1_embedding(const data::TrainingSegment& segment,
                                             nn::ParamStore& params, const ModelConfig& cfg,
                                             const data::NormStats& stats);

}  // namespace autobid::model
