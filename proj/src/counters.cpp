#include "pldlab/counters.hpp"

#include <cmath>

namespace pldlab {

namespace {

void push(std::vector<ParamSpec>& v, std::string name, std::vector<int> shape,
          InitKind init) {
  v.push_back(ParamSpec{std::move(name), std::move(shape), init});
}

}  // namespace

std::vector<ParamSpec> encoder_param_specs(const EncoderConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> v;
  const int d = cfg.dim;
  const int pd = cfg.patch * cfg.patch * cfg.channels;
  push(v, "enc.patch.w", {pd, d}, InitKind::kTruncNormal);
  push(v, "enc.patch.b", {d}, InitKind::kZero);
  push(v, "enc.pos", {cfg.num_patches(), d}, InitKind::kTruncNormal);
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string p = "enc.b" + std::to_string(b) + ".";
    push(v, p + "ln1.g", {d}, InitKind::kOne);
    push(v, p + "ln1.b", {d}, InitKind::kZero);
    push(v, p + "qkv.w", {d, 3 * d}, InitKind::kTruncNormal);
    push(v, p + "qkv.b", {3 * d}, InitKind::kZero);
    push(v, p + "proj.w", {d, d}, InitKind::kTruncNormal);
    push(v, p + "proj.b", {d}, InitKind::kZero);
    push(v, p + "ln2.g", {d}, InitKind::kOne);
    push(v, p + "ln2.b", {d}, InitKind::kZero);
    push(v, p + "mlp.w1", {d, 4 * d}, InitKind::kTruncNormal);
    push(v, p + "mlp.b1", {4 * d}, InitKind::kZero);
    push(v, p + "mlp.w2", {4 * d, d}, InitKind::kTruncNormal);
    push(v, p + "mlp.b2", {d}, InitKind::kZero);
  }
  push(v, "enc.ln.g", {d}, InitKind::kOne);
  push(v, "enc.ln.b", {d}, InitKind::kZero);
  return v;
}

std::vector<ParamSpec> decoder_param_specs(const DecoderConfig& cfg,
                                           int charset_size,
                                           int max_label_len) {
  cfg.validate();
  if (charset_size < 1) throw ConfigError("charset_size must be positive");
  std::vector<ParamSpec> v;
  const int d = cfg.dim;
  const int dh = cfg.head_dim();
  const int classes = charset_size + 1;  // + EOS
  // one positional query per decodable slot: positions 1..max_label_len+1
  push(v, "dec.pos_q", {max_label_len + 1, d}, InitKind::kTruncNormal);
  // context embeddings: charset + BOS + EOS
  push(v, "dec.ctx_embed", {charset_size + 2, d}, InitKind::kTruncNormal);
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string p = "dec.b" + std::to_string(b) + ".";
    for (const char* ca : {"ca1", "ca2"}) {
      const std::string q = p + ca + ".";
      push(v, q + "wq.w", {d, d}, InitKind::kTruncNormal);
      push(v, q + "wq.b", {d}, InitKind::kZero);
      push(v, q + "wkv.w", {d, 2 * d}, InitKind::kTruncNormal);
      push(v, q + "wkv.b", {2 * d}, InitKind::kZero);
      push(v, q + "wo.w", {d, d}, InitKind::kTruncNormal);
      push(v, q + "wo.b", {d}, InitKind::kZero);
      if (cfg.differential) {
        push(v, q + "lq1", {dh / 2}, InitKind::kLambdaNoise);
        push(v, q + "lk1", {dh / 2}, InitKind::kLambdaNoise);
        push(v, q + "lq2", {dh / 2}, InitKind::kLambdaNoise);
        push(v, q + "lk2", {dh / 2}, InitKind::kLambdaNoise);
        push(v, q + "rms.g", {d}, InitKind::kOne);
      }
    }
    push(v, p + "ln1.g", {d}, InitKind::kOne);
    push(v, p + "ln1.b", {d}, InitKind::kZero);
    push(v, p + "ln2.g", {d}, InitKind::kOne);
    push(v, p + "ln2.b", {d}, InitKind::kZero);
    push(v, p + "ln3.g", {d}, InitKind::kOne);
    push(v, p + "ln3.b", {d}, InitKind::kZero);
    if (cfg.differential) {
      push(v, p + "mlp.wg", {d, cfg.mlp_hidden()}, InitKind::kTruncNormal);
      push(v, p + "mlp.wu", {d, cfg.mlp_hidden()}, InitKind::kTruncNormal);
      push(v, p + "mlp.wd", {cfg.mlp_hidden(), d}, InitKind::kTruncNormal);
    } else {
      push(v, p + "mlp.w1", {d, cfg.mlp_hidden()}, InitKind::kTruncNormal);
      push(v, p + "mlp.b1", {cfg.mlp_hidden()}, InitKind::kZero);
      push(v, p + "mlp.w2", {cfg.mlp_hidden(), d}, InitKind::kTruncNormal);
      push(v, p + "mlp.b2", {d}, InitKind::kZero);
    }
  }
  push(v, "dec.ln.g", {d}, InitKind::kOne);
  push(v, "dec.ln.b", {d}, InitKind::kZero);
  push(v, "dec.head.w", {d, classes}, InitKind::kTruncNormal);
  push(v, "dec.head.b", {classes}, InitKind::kZero);
  return v;
}

std::int64_t count_params(const std::vector<ParamSpec>& specs) {
  std::int64_t total = 0;
  for (const auto& s : specs) total += s.size();
  return total;
}

double encoder_flops(const EncoderConfig& cfg) {
  cfg.validate();
  const double d = cfg.dim;
  const double n = cfg.num_patches();
  const double pd = cfg.patch * cfg.patch * cfg.channels;
  double macs = n * pd * d;                                    // patch embed
  macs += cfg.blocks * (12.0 * n * d * d + 2.0 * n * n * d);   // blocks
  double extra = 0;                                            // 5 FLOPs/elem
  extra += cfg.blocks * (cfg.heads * n * n    // softmax
                         + 2.0 * n * d        // two layer norms
                         + 4.0 * n * d);      // GELU on the hidden layer
  extra += n * d;                              // final layer norm
  return 2.0 * macs + 5.0 * extra;
}

double decoder_flops(const DecoderConfig& cfg, int charset_size,
                     double label_len, int num_vision_tokens) {
  cfg.validate();
  if (label_len < 0) throw ConfigError("label_len must be non-negative");
  const double d = cfg.dim;
  const double n = num_vision_tokens;
  const double classes = charset_size + 1;

  // cost of one autoregressive step with `ctx` context rows
  auto step_flops = [&](double ctx) {
    // per block: q/out projections for both cross-attentions (4 d^2), kv
    // projections over context and vision rows, attention itself, MLP
    const double proj_macs = 4.0 * d * d + 2.0 * (ctx + n) * d * d;
    const double attn_macs = 2.0 * (ctx + n) * d;
    const double mlp_macs = (cfg.differential ? 12.0 : 8.0) * d * d;
    double macs = cfg.blocks * (proj_macs + attn_macs + mlp_macs);
    macs += classes * d;  // output head on the one query row
    double extra = 0;
    const double maps = cfg.differential ? 2.0 : 1.0;
    extra += cfg.blocks * (maps * cfg.heads * (ctx + n)  // softmax rows
                           + 3.0 * d                     // pre-norms
                           + (cfg.differential ? 2.0 * d : 0.0)  // head RMS
                           + 4.0 * d);                   // activation
    extra += d;  // final layer norm
    return 2.0 * macs + 5.0 * extra;
  };

  // steps s = 1..L+2, context grows by one row per step starting at 1 (BOS)
  const double total_steps = label_len + 2.0;
  const int whole = static_cast<int>(std::floor(total_steps));
  const double frac = total_steps - whole;
  double flops = 0;
  for (int s = 1; s <= whole; ++s) flops += step_flops(s);
  if (frac > 0) flops += frac * step_flops(whole + 1);
  return flops;
}

}  // namespace pldlab
