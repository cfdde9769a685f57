#include "autobid/model.hpp"

#include <cmath>

#include "autobid/errors.hpp"

namespace autobid::model {

using nn::Shape;
using nn::Tensor;

std::string to_string(Variant v) { return v == Variant::clb_dt ? "clb_dt" : "vanilla_dt"; }

Variant variant_from_string(const std::string& s) {
  if (s == "clb_dt") return Variant::clb_dt;
  if (s == "vanilla_dt") return Variant::vanilla_dt;
  throw ConfigError(detail::msg("unknown variant '", s, "' (expected clb_dt|vanilla_dt)"));
}

void ModelConfig::validate() const {
  if (hidden_dim < 1) throw ConfigError(detail::msg("hidden_dim must be >= 1, got ", hidden_dim));
  if (d_k() != hidden_dim)
    throw ConfigError(detail::msg("attn_dim (", d_k(), ") must equal hidden_dim (", hidden_dim,
                                  "): attention outputs add directly onto the residual stream"));
  if (d_ff() < 1) throw ConfigError("ff_dim must be >= 1");
  if (num_blocks < 1) throw ConfigError(detail::msg("num_blocks must be >= 1, got ", num_blocks));
  if (window < 1) throw ConfigError(detail::msg("window must be >= 1, got ", window));
  if (horizon < 1) throw ConfigError(detail::msg("horizon must be >= 1, got ", horizon));
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError(detail::msg("dropout_rate must be in [0,1), got ", dropout_rate));
  if (!(mask_fill < -1e3))
    throw ConfigError(detail::msg("mask_fill must be < -1e3 to suppress attention, got ", mask_fill));
  if (layer_norm_eps <= 0.0) throw ConfigError("layer_norm_eps must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = {{"hidden_dim", cfg.hidden_dim},
       {"attn_dim", cfg.attn_dim},
       {"ff_dim", cfg.ff_dim},
       {"num_blocks", cfg.num_blocks},
       {"window", cfg.window},
       {"horizon", cfg.horizon},
       {"dropout_rate", cfg.dropout_rate},
       {"mask_fill", cfg.mask_fill},
       {"layer_norm_eps", cfg.layer_norm_eps},
       {"variant", to_string(cfg.variant)},
       {"action_head", cfg.action_head == ActionHeadStream::state ? "state" : "action"},
       {"rtg_head", cfg.rtg_head == RtgHeadStream::state ? "state" : "rtg"}};
}

void from_json(const nlohmann::json& j, ModelConfig& cfg) {
  cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
  cfg.attn_dim = j.value("attn_dim", cfg.attn_dim);
  cfg.ff_dim = j.value("ff_dim", cfg.ff_dim);
  cfg.num_blocks = j.value("num_blocks", cfg.num_blocks);
  cfg.window = j.value("window", cfg.window);
  cfg.horizon = j.value("horizon", cfg.horizon);
  cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
  cfg.mask_fill = j.value("mask_fill", cfg.mask_fill);
  cfg.layer_norm_eps = j.value("layer_norm_eps", cfg.layer_norm_eps);
  if (j.contains("variant")) cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("action_head"))
    cfg.action_head = j.at("action_head").get<std::string>() == "action" ? ActionHeadStream::action
                                                                         : ActionHeadStream::state;
  if (j.contains("rtg_head"))
    cfg.rtg_head =
        j.at("rtg_head").get<std::string>() == "rtg" ? RtgHeadStream::rtg : RtgHeadStream::state;
}

// ---- parameter construction -------------------------------------------------

namespace {

std::vector<double> normal_init(Rng& rng, int64_t n, double stddev) {
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return v;
}

void create_ln(nn::ParamStore& store, const std::string& prefix, int d) {
  store.create(prefix + ".gamma", {d}, std::vector<double>(static_cast<size_t>(d), 1.0));
  store.create(prefix + ".beta", {d});
}

void create_attn_path(nn::ParamStore& store, Rng& rng, const std::string& prefix, int d, int dk) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  store.create(prefix + ".wq", {d, dk}, normal_init(rng, static_cast<int64_t>(d) * dk, stddev));
  store.create(prefix + ".bq", {dk});
  store.create(prefix + ".wk", {d, dk}, normal_init(rng, static_cast<int64_t>(d) * dk, stddev));
  store.create(prefix + ".bk", {dk});
  store.create(prefix + ".wv", {d, dk}, normal_init(rng, static_cast<int64_t>(d) * dk, stddev));
  store.create(prefix + ".bv", {dk});
}

void create_ff(nn::ParamStore& store, Rng& rng, const std::string& prefix, int d, int dff) {
  store.create(prefix + ".w1", {d, dff},
               normal_init(rng, static_cast<int64_t>(d) * dff, 1.0 / std::sqrt(static_cast<double>(d))));
  store.create(prefix + ".b1", {dff});
  store.create(prefix + ".w2", {dff, d},
               normal_init(rng, static_cast<int64_t>(dff) * d, 1.0 / std::sqrt(static_cast<double>(dff))));
  store.create(prefix + ".b2", {d});
}

AttnPath fetch_attn(nn::ParamStore& store, const std::string& prefix) {
  return {store.get(prefix + ".wq"), store.get(prefix + ".bq"), store.get(prefix + ".wk"),
          store.get(prefix + ".bk"), store.get(prefix + ".wv"), store.get(prefix + ".bv")};
}

LnSite fetch_ln(nn::ParamStore& store, const std::string& prefix) {
  return {store.get(prefix + ".gamma"), store.get(prefix + ".beta")};
}

FfParams fetch_ff(nn::ParamStore& store, const std::string& prefix) {
  return {store.get(prefix + ".w1"), store.get(prefix + ".b1"), store.get(prefix + ".w2"),
          store.get(prefix + ".b2")};
}

std::string block_prefix(int block_index) { return detail::msg("block", block_index); }

}  // namespace

void init_params(nn::ParamStore& store, const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0x494e4954ull));
  const int d = cfg.hidden_dim;
  const int dk = cfg.d_k();
  const int dff = cfg.d_ff();

  store.create("enc.timestep", {cfg.horizon, d},
               normal_init(rng, static_cast<int64_t>(cfg.horizon) * d, 1.0 / std::sqrt(static_cast<double>(d))));
  store.create("enc.state.w", {env::kStateDim, d},
               normal_init(rng, static_cast<int64_t>(env::kStateDim) * d,
                           1.0 / std::sqrt(static_cast<double>(env::kStateDim))));
  store.create("enc.state.b", {d});
  store.create("enc.action.w", {1, d}, normal_init(rng, d, 1.0));
  store.create("enc.action.b", {d});
  store.create("enc.rtg.w", {1, d}, normal_init(rng, d, 1.0));
  store.create("enc.rtg.b", {d});

  for (int b = 0; b < cfg.num_blocks; ++b) {
    const std::string bp = block_prefix(b);
    if (cfg.variant == Variant::clb_dt) {
      const char* streams[3] = {"s", "a", "r"};
      // q-sources for each stream, in (s,a,r)-minus-self order.
      const char* sources[3][2] = {{"a", "r"}, {"s", "r"}, {"s", "a"}};
      for (int i = 0; i < 3; ++i) {
        const std::string sp = bp + "." + streams[i];
        create_ln(store, sp + ".ln_attn", d);
        create_attn_path(store, rng, sp + ".attn.q_" + sources[i][0], d, dk);
        create_attn_path(store, rng, sp + ".attn.q_" + sources[i][1], d, dk);
        create_ln(store, sp + ".ln_ff", d);
        create_ff(store, rng, sp + ".ff", d, dff);
      }
    } else {
      const std::string sp = bp + ".tok";
      create_ln(store, sp + ".ln_attn", d);
      create_attn_path(store, rng, sp + ".attn.self", d, dk);
      create_ln(store, sp + ".ln_ff", d);
      create_ff(store, rng, sp + ".ff", d, dff);
    }
  }

  // Small head weights keep early predictions near zero.
  const double head_std = 0.1 / std::sqrt(static_cast<double>(d));
  store.create("head.action.w", {d, 1}, normal_init(rng, d, head_std));
  store.create("head.action.b", {1});
  store.create("head.rtg.w", {d, 1}, normal_init(rng, d, head_std));
  store.create("head.rtg.b", {1});
}

ClbParams fetch_clb_params(nn::ParamStore& store, int block_index) {
  const std::string bp = block_prefix(block_index);
  ClbParams p;
  p.s = {fetch_ln(store, bp + ".s.ln_attn"), fetch_ln(store, bp + ".s.ln_ff"),
         fetch_attn(store, bp + ".s.attn.q_a"), fetch_attn(store, bp + ".s.attn.q_r"),
         fetch_ff(store, bp + ".s.ff")};
  p.a = {fetch_ln(store, bp + ".a.ln_attn"), fetch_ln(store, bp + ".a.ln_ff"),
         fetch_attn(store, bp + ".a.attn.q_s"), fetch_attn(store, bp + ".a.attn.q_r"),
         fetch_ff(store, bp + ".a.ff")};
  p.r = {fetch_ln(store, bp + ".r.ln_attn"), fetch_ln(store, bp + ".r.ln_ff"),
         fetch_attn(store, bp + ".r.attn.q_s"), fetch_attn(store, bp + ".r.attn.q_a"),
         fetch_ff(store, bp + ".r.ff")};
  return p;
}

// ---- batch assembly ----------------------------------------------------------

SegmentBatch make_batch(const std::vector<const data::TrainingSegment*>& segments,
                        const data::NormStats& stats, const ModelConfig& cfg) {
  if (segments.empty()) throw ContractError("make_batch: empty segment list");
  const int m = cfg.window;
  const int b = static_cast<int>(segments.size());

  SegmentBatch batch;
  batch.batch = b;
  batch.window = m;
  batch.timesteps.assign(static_cast<size_t>(b) * m, 0);
  batch.valid.assign(static_cast<size_t>(b) * m, 0);
  batch.target_actions.assign(static_cast<size_t>(b) * m, 0.0);
  batch.target_rtg.assign(static_cast<size_t>(b) * m, 0.0);
  batch.penalties.assign(static_cast<size_t>(b) * m, 0.0);

  std::vector<double> states(static_cast<size_t>(b) * m * env::kStateDim, 0.0);
  std::vector<double> actions(static_cast<size_t>(b) * m, 0.0);
  std::vector<double> prev_actions(static_cast<size_t>(b) * m, 0.0);
  std::vector<double> rtg(static_cast<size_t>(b) * m, 0.0);

  for (int i = 0; i < b; ++i) {
    const auto& seg = *segments[static_cast<size_t>(i)];
    if (static_cast<int>(seg.valid.size()) != m)
      throw DimensionError(detail::msg("make_batch: segment window is ", seg.valid.size(),
                                       ", model expects ", m));
    for (int p = 0; p < m; ++p) {
      const auto flat = static_cast<size_t>(i) * m + static_cast<size_t>(p);
      if (!seg.valid[static_cast<size_t>(p)]) continue;  // keep padding at exact zero
      batch.valid[flat] = 1;
      batch.timesteps[flat] = seg.timesteps[static_cast<size_t>(p)];
      actions[flat] = seg.actions[static_cast<size_t>(p)];
      prev_actions[flat] = seg.prev_actions[static_cast<size_t>(p)];
      rtg[flat] = stats.norm_rtg(seg.rtg[static_cast<size_t>(p)]);
      for (int f = 0; f < env::kStateDim; ++f)
        states[flat * env::kStateDim + static_cast<size_t>(f)] =
            stats.norm_state(f, seg.states[static_cast<size_t>(p) * env::kStateDim + static_cast<size_t>(f)]);
      batch.target_actions[flat] = seg.actions[static_cast<size_t>(p)];
      batch.target_rtg[flat] = rtg[flat];
      batch.penalties[flat] = seg.penalty;
    }
  }

  batch.states = Tensor::from_values({b, m, env::kStateDim}, std::move(states));
  batch.actions = Tensor::from_values({b, m, 1}, std::move(actions));
  batch.prev_actions = Tensor::from_values({b, m, 1}, std::move(prev_actions));
  batch.rtg = Tensor::from_values({b, m, 1}, std::move(rtg));
  return batch;
}

nn::Tensor causal_mask(const std::vector<uint8_t>& valid, int batch, int window, double mask_fill) {
  std::vector<double> mask(static_cast<size_t>(batch) * window * window, mask_fill);
  for (int i = 0; i < batch; ++i) {
    const uint8_t* v = valid.data() + static_cast<size_t>(i) * window;
    double* m = mask.data() + static_cast<size_t>(i) * window * window;
    for (int q = 0; q < window; ++q) {
      if (!v[q]) continue;
      for (int k = 0; k <= q; ++k)
        if (v[k]) m[static_cast<size_t>(q) * window + k] = 0.0;
    }
  }
  return Tensor::from_values({batch, window, window}, std::move(mask));
}

nn::Tensor token_causal_mask(const std::vector<uint8_t>& valid, int batch, int window,
                             double mask_fill) {
  const int len = 3 * window;
  std::vector<double> mask(static_cast<size_t>(batch) * len * len, mask_fill);
  for (int i = 0; i < batch; ++i) {
    const uint8_t* v = valid.data() + static_cast<size_t>(i) * window;
    double* m = mask.data() + static_cast<size_t>(i) * len * len;
    for (int q = 0; q < len; ++q) {
      if (!v[q / 3]) continue;
      for (int k = 0; k <= q; ++k)
        if (v[k / 3]) m[static_cast<size_t>(q) * len + k] = 0.0;
    }
  }
  return Tensor::from_values({batch, len, len}, std::move(mask));
}

// ---- forward passes ----------------------------------------------------------

EncodedStreams encode_inputs(const std::vector<int>& timesteps, const Tensor& states,
                             const Tensor& actions, const Tensor& rtg, nn::ParamStore& params,
                             const ModelConfig& cfg) {
  const int b = states.shape()[0];
  const int m = states.shape()[1];
  if (static_cast<int64_t>(timesteps.size()) != static_cast<int64_t>(b) * m)
    throw DimensionError("encode_inputs: timestep count does not match batch");

  Tensor t0 = nn::embedding_lookup(params.get("enc.timestep"), timesteps, {b, m});
  EncodedStreams out;
  out.s = nn::add(nn::linear(states, params.get("enc.state.w"), params.get("enc.state.b")), t0);
  out.a = nn::add(nn::linear(actions, params.get("enc.action.w"), params.get("enc.action.b")), t0);
  out.r = nn::add(nn::linear(rtg, params.get("enc.rtg.w"), params.get("enc.rtg.b")), t0);
  return out;
}

Tensor masked_cross_attention(const Tensor& x_stream, const Tensor& y_stream, const AttnPath& path,
                              const Tensor& mask, int d_k) {
  if (x_stream.shape() != y_stream.shape())
    throw DimensionError(detail::msg("masked_cross_attention: stream shapes differ, ",
                                     nn::shape_str(x_stream.shape()), " vs ",
                                     nn::shape_str(y_stream.shape())));
  const int m = x_stream.shape()[x_stream.dim() - 2];
  if (mask.shape().back() != m || mask.shape()[mask.dim() - 2] != m)
    throw DimensionError(detail::msg("masked_cross_attention: mask ", nn::shape_str(mask.shape()),
                                     " does not cover a ", m, "x", m, " score matrix"));
  Tensor q = nn::linear(x_stream, path.wq, path.bq);
  Tensor k = nn::linear(y_stream, path.wk, path.bk);
  Tensor v = nn::linear(y_stream, path.wv, path.bv);
  Tensor scores = nn::scale(nn::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d_k)));
  Tensor weights = nn::softmax_last(nn::add(scores, mask));
  return nn::matmul(weights, v);
}

namespace {

Tensor feed_forward(const Tensor& x, const FfParams& ff, const ModelConfig& cfg, bool training,
                    Rng* dropout_rng) {
  Tensor h = nn::linear(nn::relu(nn::linear(x, ff.w1, ff.b1)), ff.w2, ff.b2);
  if (!training || cfg.dropout_rate == 0.0) return h;
  if (!dropout_rng)
    throw ContractError("feed_forward: training mode needs a dropout RNG stream");
  return nn::dropout(h, cfg.dropout_rate, true, *dropout_rng);
}

Tensor stream_update(const Tensor& self, const Tensor& self_norm, const Tensor& q1,
                     const Tensor& q2, const StreamBlockParams& p, const Tensor& mask,
                     const ModelConfig& cfg, bool training, Rng* dropout_rng) {
  Tensor attn = nn::add(nn::add(self, masked_cross_attention(q1, self_norm, p.from_first, mask, cfg.d_k())),
                        masked_cross_attention(q2, self_norm, p.from_second, mask, cfg.d_k()));
  Tensor normed = nn::layer_norm(attn, p.ln_ff.gamma, p.ln_ff.beta, cfg.layer_norm_eps);
  return feed_forward(normed, p.ff, cfg, training, dropout_rng);
}

}  // namespace

StreamTriple clb_forward(const StreamTriple& in, const ClbParams& block, const Tensor& mask,
                         const ModelConfig& cfg, bool training, Rng* dropout_rng) {
  const double eps = cfg.layer_norm_eps;
  Tensor sn = nn::layer_norm(in.s, block.s.ln_attn.gamma, block.s.ln_attn.beta, eps);
  Tensor an = nn::layer_norm(in.a, block.a.ln_attn.gamma, block.a.ln_attn.beta, eps);
  Tensor rn = nn::layer_norm(in.r, block.r.ln_attn.gamma, block.r.ln_attn.beta, eps);

  StreamTriple out;
  // Each stream keeps itself as the K/V source; queries come from the other
  // two streams, residual on the stream itself.
  out.s = stream_update(in.s, sn, an, rn, block.s, mask, cfg, training, dropout_rng);
  out.a = stream_update(in.a, an, sn, rn, block.a, mask, cfg, training, dropout_rng);
  out.r = stream_update(in.r, rn, sn, an, block.r, mask, cfg, training, dropout_rng);
  return out;
}

namespace {

Tensor head_apply(const Tensor& hidden, nn::ParamStore& params, const std::string& head) {
  Tensor out = nn::linear(hidden, params.get(head + ".w"), params.get(head + ".b"));
  return nn::reshape(out, {hidden.shape()[0], hidden.shape()[1]});
}

}  // namespace

ForwardResult clb_dt_forward(const SegmentBatch& batch, nn::ParamStore& params,
                             const ModelConfig& cfg, bool training, Rng* dropout_rng) {
  // The action stream carries the previous step's action at each position, so
  // the prediction at position t never conditions on its own target.
  EncodedStreams enc =
      encode_inputs(batch.timesteps, batch.states, batch.prev_actions, batch.rtg, params, cfg);
  Tensor mask = causal_mask(batch.valid, batch.batch, batch.window, cfg.mask_fill);

  StreamTriple streams{enc.s, enc.a, enc.r};
  for (int b = 0; b < cfg.num_blocks; ++b)
    streams = clb_forward(streams, fetch_clb_params(params, b), mask, cfg, training, dropout_rng);

  ForwardResult result;
  const Tensor& action_src = cfg.action_head == ActionHeadStream::action ? streams.a : streams.s;
  const Tensor& rtg_src = cfg.rtg_head == RtgHeadStream::rtg ? streams.r : streams.s;
  result.pred_actions = head_apply(action_src, params, "head.action");
  result.pred_rtg = head_apply(rtg_src, params, "head.rtg");
  return result;
}

ForwardResult vanilla_dt_forward(const SegmentBatch& batch, nn::ParamStore& params,
                                 const ModelConfig& cfg, bool training, Rng* dropout_rng) {
  // Interleaved (r_t, s_t, a_t) tokens through causal self-attention; the
  // same-step action rides as the third token, hidden from its own step's
  // prediction site by the token-level mask.
  EncodedStreams enc =
      encode_inputs(batch.timesteps, batch.states, batch.actions, batch.rtg, params, cfg);
  Tensor tokens = nn::interleave_rows(enc.r, enc.s, enc.a);
  Tensor mask = token_causal_mask(batch.valid, batch.batch, batch.window, cfg.mask_fill);

  for (int b = 0; b < cfg.num_blocks; ++b) {
    const std::string bp = detail::msg("block", b, ".tok");
    LnSite ln_attn = fetch_ln(params, bp + ".ln_attn");
    LnSite ln_ff = fetch_ln(params, bp + ".ln_ff");
    AttnPath self = fetch_attn(params, bp + ".attn.self");
    FfParams ff = fetch_ff(params, bp + ".ff");

    Tensor normed = nn::layer_norm(tokens, ln_attn.gamma, ln_attn.beta, cfg.layer_norm_eps);
    Tensor attn = nn::add(tokens, masked_cross_attention(normed, normed, self, mask, cfg.d_k()));
    tokens = feed_forward(nn::layer_norm(attn, ln_ff.gamma, ln_ff.beta, cfg.layer_norm_eps), ff, cfg,
                          training, dropout_rng);
  }

  // Actions are read at the s-token; RTG at the token preceding each r-token
  // (the prior step's a-token), with position 0 falling back to its own
  // r-token.
  std::vector<int> action_idx(static_cast<size_t>(batch.window));
  std::vector<int> rtg_idx(static_cast<size_t>(batch.window));
  for (int p = 0; p < batch.window; ++p) {
    action_idx[static_cast<size_t>(p)] = 3 * p + 1;
    rtg_idx[static_cast<size_t>(p)] = p == 0 ? 0 : 3 * p - 1;
  }

  ForwardResult result;
  result.pred_actions = head_apply(nn::gather_rows(tokens, action_idx), params, "head.action");
  result.pred_rtg = head_apply(nn::gather_rows(tokens, rtg_idx), params, "head.rtg");
  return result;
}

ForwardResult model_forward(const SegmentBatch& batch, nn::ParamStore& params,
                            const ModelConfig& cfg, bool training, Rng* dropout_rng) {
  cfg.validate();
  return cfg.variant == Variant::clb_dt
             ? clb_dt_forward(batch, params, cfg, training, dropout_rng)
             : vanilla_dt_forward(batch, params, cfg, training, dropout_rng);
}

std::vector<double> extract_block1_embedding(const data::TrainingSegment& segment,
                                             nn::ParamStore& params, const ModelConfig& cfg,
                                             const data::NormStats& stats) {
  nn::NoGradGuard no_grad;
  SegmentBatch batch = make_batch({&segment}, stats, cfg);
  const int m = cfg.window;
  const int d = cfg.hidden_dim;

  if (cfg.variant == Variant::clb_dt) {
    EncodedStreams enc =
        encode_inputs(batch.timesteps, batch.states, batch.prev_actions, batch.rtg, params, cfg);
    Tensor mask = causal_mask(batch.valid, 1, m, cfg.mask_fill);
    StreamTriple out = clb_forward({enc.s, enc.a, enc.r}, fetch_clb_params(params, 0), mask, cfg,
                                   /*training=*/false, nullptr);
    // Windows are right-aligned, so the final position is always valid.
    std::vector<double> emb;
    emb.reserve(3 * static_cast<size_t>(d));
    for (const Tensor* stream : {&out.s, &out.a, &out.r}) {
      auto vals = stream->values();
      emb.insert(emb.end(), vals.begin() + static_cast<int64_t>(m - 1) * d,
                 vals.begin() + static_cast<int64_t>(m) * d);
    }
    return emb;
  }

  EncodedStreams enc =
      encode_inputs(batch.timesteps, batch.states, batch.actions, batch.rtg, params, cfg);
  Tensor tokens = nn::interleave_rows(enc.r, enc.s, enc.a);
  Tensor mask = token_causal_mask(batch.valid, 1, m, cfg.mask_fill);
  const std::string bp = "block0.tok";
  Tensor normed =
      nn::layer_norm(tokens, params.get(bp + ".ln_attn.gamma"), params.get(bp + ".ln_attn.beta"),
                     cfg.layer_norm_eps);
  Tensor attn =
      nn::add(tokens, masked_cross_attention(normed, normed, fetch_attn(params, bp + ".attn.self"),
                                             mask, cfg.d_k()));
  Tensor out = feed_forward(
      nn::layer_norm(attn, params.get(bp + ".ln_ff.gamma"), params.get(bp + ".ln_ff.beta"),
                     cfg.layer_norm_eps),
      fetch_ff(params, bp + ".ff"), cfg, /*training=*/false, nullptr);

  auto vals = out.values();
  const int last = 3 * m - 1;
  return {vals.begin() + static_cast<int64_t>(last) * d, vals.begin() + static_cast<int64_t>(last + 1) * d};
}

}  // namespace autobid::model
