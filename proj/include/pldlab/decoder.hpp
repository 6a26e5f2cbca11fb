#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pldlab/config.hpp"
#include "pldlab/model.hpp"
#include "pldlab/ops.hpp"
#include "pldlab/vocab.hpp"

namespace pldlab {

inline constexpr float kMaskDeny = -1e9f;
inline constexpr float kMaskAllow = 0.0f;

// Post-softmax attention maps captured during a forward pass, for the
// qualitative map comparisons. For differential attention the COMBINED map
// (map1 - lambda * map2) is recorded; its rows sum to 1 - lambda.
template <class T>
struct AttnRecorder {
  struct Entry {
    int block;  // 0-based
    int layer;  // 1 = context cross-attention, 2 = vision cross-attention
    int item;
    int head;
    int rows, cols;
    std::vector<T> weights;  // row-major copy
  };
  std::vector<Entry> entries;
};

// One decoding workload against one image: a set of positional queries plus
// the visible context. Context row 0 is always BOS; row 1+j is character
// context_chars[j] sitting at 1-based position context_positions[j].
// context_chars entries are label classes (charset index, or charset_size
// for the EOS marker). The mask is [positions.size(), 1 + context size],
// additive 0 / -1e9, and column 0 (BOS) must be allowed in every row.
//
// Context rows may arrive in any order: the decoder canonicalizes them to
// ascending position (permuting mask columns to match) before computing, so
// two orderings of the same conditioning set give bit-identical logits.
// Duplicate context positions are rejected.
template <class T>
struct DecodeItem {
  int vision_index = 0;
  std::vector<int> positions;
  std::vector<int> context_chars;
  std::vector<int> context_positions;
  Tensor<T> mask;
};

template <class T>
Tensor<T> mask_tensor(const std::vector<float>& mask, int rows, int cols) {
  if (static_cast<std::int64_t>(mask.size()) !=
      static_cast<std::int64_t>(rows) * cols)
    throw ShapeError("mask size " + std::to_string(mask.size()) +
                     " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  std::vector<T> vals(mask.begin(), mask.end());
  return Tensor<T>::from({rows, cols}, std::move(vals));
}

namespace detail {

template <class T>
void check_mask_rows(const Tensor<T>& mask) {
  const int r = mask.dim(0), c = mask.dim(1);
  for (int i = 0; i < r; ++i) {
    bool any = false;
    for (int j = 0; j < c && !any; ++j)
      any = mask.data()[std::int64_t(i) * c + j] > T(-1e8);
    if (!any)
      throw ContractError("attention mask row " + std::to_string(i) +
                          " denies every key (even BOS)");
    if (!(mask.data()[std::int64_t(i) * c] > T(-1e8)))
      throw ContractError("attention mask row " + std::to_string(i) +
                          " denies BOS");
  }
}

template <class T>
void record_map(AttnRecorder<T>* rec, int block, int layer, int item, int head,
                const Tensor<T>& map) {
  if (!rec) return;
  typename AttnRecorder<T>::Entry e;
  e.block = block;
  e.layer = layer;
  e.item = item;
  e.head = head;
  e.rows = map.dim(0);
  e.cols = map.dim(1);
  e.weights.assign(map.data(), map.data() + map.size());
  rec->entries.push_back(std::move(e));
}

}  // namespace detail

// Standard single-head attention on pre-sliced q/k/v. `mask` may be null.
template <class T>
Tensor<T> std_attention_head(const Tensor<T>& q, const Tensor<T>& k,
                             const Tensor<T>& v, const Tensor<T>* mask,
                             Tensor<T>* recorded = nullptr) {
  const T scale = T(1) / std::sqrt(T(q.dim(1)));
  Tensor<T> scores = ops::scale(ops::matmul_nt(q, k), scale);
  if (mask) scores = ops::add(scores, *mask);
  Tensor<T> attn = ops::softmax_rows(scores);
  if (recorded) *recorded = attn;
  return ops::matmul(attn, v);
}

template <class T>
struct DiffHeadParams {
  Tensor<T> lq1, lk1, lq2, lk2;  // reparameterization vectors, [head_dim/2]
  Tensor<T> rms_gain;            // per-head output norm gain, [head_dim]
  double lambda_init = 0.0;
  // test hooks: with lambda forced to 0 and the output norm skipped, the
  // head must reproduce std_attention_head on the first q/k halves
  bool skip_rms = false;
  std::optional<double> lambda_override;
};

// Differential single-head attention. q/k are split into halves; each half
// drives its own softmax map over the SAME keys, and the two maps are
// combined as map1 - lambda * map2 before weighting v.
template <class T>
Tensor<T> diff_attention_head(const Tensor<T>& q, const Tensor<T>& k,
                              const Tensor<T>& v, const Tensor<T>* mask,
                              const DiffHeadParams<T>& dp,
                              Tensor<T>* recorded = nullptr) {
  const int dh = q.dim(1);
  if (dh % 2 != 0)
    throw ShapeError("differential head dim must be even, got " +
                     std::to_string(dh));
  const int ds = dh / 2;
  const T scale = T(1) / std::sqrt(T(ds));
  auto map_for = [&](int off) {
    Tensor<T> qh = ops::slice_cols(q, off, ds);
    Tensor<T> kh = ops::slice_cols(k, off, ds);
    Tensor<T> s = ops::scale(ops::matmul_nt(qh, kh), scale);
    if (mask) s = ops::add(s, *mask);
    return ops::softmax_rows(s);
  };
  Tensor<T> m1 = map_for(0);
  Tensor<T> m2 = map_for(ds);

  Tensor<T> lambda;
  if (dp.lambda_override.has_value()) {
    lambda = Tensor<T>::scalar(static_cast<T>(*dp.lambda_override));
  } else {
    lambda = ops::add_scalar(
        ops::sub(ops::exp_scalar(ops::dot(dp.lq1, dp.lk1)),
                 ops::exp_scalar(ops::dot(dp.lq2, dp.lk2))),
        static_cast<T>(dp.lambda_init));
  }
  Tensor<T> combined = ops::sub(m1, ops::scale_by(m2, lambda));
  if (recorded) *recorded = combined;
  Tensor<T> out = ops::matmul(combined, v);
  if (!dp.skip_rms) out = ops::rms_norm_rows(out, dp.rms_gain);
  return out;
}

// Permutation-capable cross-attention decoder. One query-stream of
// positional embeddings runs through `blocks` blocks; each block reads the
// character context (masked) and the vision tokens (unmasked) via
// cross-attention and never writes back to either: context and vision
// tensors are consumed read-only, so their values are bitwise unchanged
// across the whole forward pass.
template <class T>
class PldDecoder {
 public:
  PldDecoder(DecoderConfig cfg, int charset_size,
             int max_label_len, ParamSet<T>& params)
      : cfg_(std::move(cfg)),
        charset_size_(charset_size),
        max_len_(max_label_len),
        params_(&params) {
    cfg_.validate();
  }

  const DecoderConfig& config() const { return cfg_; }
  int classes() const { return charset_size_ + 1; }
  int eos_class() const { return charset_size_; }
  int max_label_len() const { return max_len_; }

  // Stacked logits [sum of positions across items, classes], item order.
  Tensor<T> decode_batch(const Tensor<T>& vision, int tokens_per_image,
                         const std::vector<DecodeItem<T>>& items,
                         AttnRecorder<T>* rec = nullptr) const {
    if (items.empty()) throw DataError("decode_batch: no items");
    if (vision.rank() != 2 || vision.dim(1) != cfg_.dim)
      throw ShapeError("vision tokens " + shape_str(vision.shape()) +
                       " vs decoder dim " + std::to_string(cfg_.dim));
    if (tokens_per_image <= 0 || vision.dim(0) % tokens_per_image != 0)
      throw ShapeError("vision rows " + std::to_string(vision.dim(0)) +
                       " not a multiple of tokens_per_image " +
                       std::to_string(tokens_per_image));
    const int num_images = vision.dim(0) / tokens_per_image;

    auto& P = *params_;
    const Tensor<T>& pos_q = P.get("dec.pos_q");
    const Tensor<T>& ctx_embed = P.get("dec.ctx_embed");

    // positions index pos_ext: row 0 = zeros (BOS gets no positional query),
    // row p = positional query for 1-based position p
    Tensor<T> pos_ext =
        ops::concat_rows<T>({Tensor<T>::zeros({1, cfg_.dim}), pos_q});

    std::vector<int> q_pos_rows, ctx_embed_rows, ctx_pos_rows;
    std::vector<int> q_off(items.size() + 1, 0), c_off(items.size() + 1, 0);
    std::vector<Tensor<T>> canon_masks(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& it = items[i];
      if (it.vision_index < 0 || it.vision_index >= num_images)
        throw ShapeError("vision_index " + std::to_string(it.vision_index) +
                         " out of batch of " + std::to_string(num_images));
      if (it.positions.empty())
        throw DataError("decode item with no query positions");
      if (it.context_chars.size() != it.context_positions.size())
        throw ShapeError("context chars/positions length mismatch: " +
                         std::to_string(it.context_chars.size()) + " vs " +
                         std::to_string(it.context_positions.size()));
      const int tq = static_cast<int>(it.positions.size());
      const int tc = 1 + static_cast<int>(it.context_chars.size());
      if (!it.mask.defined() || it.mask.rank() != 2 || it.mask.dim(0) != tq ||
          it.mask.dim(1) != tc)
        throw ShapeError("mask " +
                         (it.mask.defined() ? shape_str(it.mask.shape())
                                            : std::string("[undefined]")) +
                         " vs queries x context [" + std::to_string(tq) + "x" +
                         std::to_string(tc) + "]");
      detail::check_mask_rows(it.mask);
      for (int p : it.positions) q_pos_rows.push_back(check_position(p) - 1);
      ctx_embed_rows.push_back(charset_size_);  // BOS embedding row
      ctx_pos_rows.push_back(0);                // zero positional row

      // canonicalize context to ascending position so float summation order
      // never depends on how the caller ordered the conditioning set
      const int nctx = static_cast<int>(it.context_chars.size());
      std::vector<int> order(static_cast<std::size_t>(nctx));
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return it.context_positions[static_cast<std::size_t>(a)] <
               it.context_positions[static_cast<std::size_t>(b)];
      });
      bool identity = true;
      for (int j = 0; j < nctx; ++j) {
        const int src = order[static_cast<std::size_t>(j)];
        identity = identity && src == j;
        if (j > 0 &&
            it.context_positions[static_cast<std::size_t>(src)] ==
                it.context_positions[static_cast<std::size_t>(
                    order[static_cast<std::size_t>(j - 1)])])
          throw ContractError(
              "duplicate context position " +
              std::to_string(it.context_positions[static_cast<std::size_t>(src)]));
        ctx_embed_rows.push_back(
            context_embed_row(it.context_chars[static_cast<std::size_t>(src)]));
        ctx_pos_rows.push_back(check_position(
            it.context_positions[static_cast<std::size_t>(src)]));
      }
      if (identity) {
        canon_masks[i] = it.mask;
      } else {
        std::vector<T> mv(static_cast<std::size_t>(tq) * tc);
        const T* src_mask = it.mask.data();
        for (int r2 = 0; r2 < tq; ++r2) {
          mv[std::size_t(r2) * tc] = src_mask[std::int64_t(r2) * tc];
          for (int j = 0; j < nctx; ++j)
            mv[std::size_t(r2) * tc + 1 + j] =
                src_mask[std::int64_t(r2) * tc + 1 +
                         order[static_cast<std::size_t>(j)]];
        }
        canon_masks[i] = Tensor<T>::from({tq, tc}, std::move(mv));
      }
      q_off[i + 1] = q_off[i] + tq;
      c_off[i + 1] = c_off[i] + tc;
    }

    // x: query stream; ctx: per-item context rows (BOS + embedded chars)
    Tensor<T> x = ops::gather_rows(pos_q, q_pos_rows);
    Tensor<T> ctx = ops::add(ops::gather_rows(ctx_embed, ctx_embed_rows),
                             ops::gather_rows(pos_ext, ctx_pos_rows));

    const int dh = cfg_.head_dim();
    for (int blk = 0; blk < cfg_.blocks; ++blk) {
      const std::string pre = "dec.b" + std::to_string(blk) + ".";
      // context cross-attention (masked)
      x = ops::add(x, run_cross_attention(
                          pre + "ca1", blk, 1,
                          ops::layer_norm_rows(x, P.get(pre + "ln1.g"),
                                               P.get(pre + "ln1.b")),
                          ctx, items, canon_masks, q_off, c_off,
                          tokens_per_image, /*over_vision=*/false, rec));
      // vision cross-attention (unmasked)
      x = ops::add(x, run_cross_attention(
                          pre + "ca2", blk, 2,
                          ops::layer_norm_rows(x, P.get(pre + "ln2.g"),
                                               P.get(pre + "ln2.b")),
                          vision, items, canon_masks, q_off, c_off,
                          tokens_per_image, /*over_vision=*/true, rec));
      // MLP
      Tensor<T> h = ops::layer_norm_rows(x, P.get(pre + "ln3.g"),
                                         P.get(pre + "ln3.b"));
      Tensor<T> mlp;
      if (cfg_.differential) {
        mlp = ops::swiglu(h, P.get(pre + "mlp.wg"), P.get(pre + "mlp.wu"),
                          P.get(pre + "mlp.wd"));
      } else {
        mlp = ops::add_rowvec(ops::matmul(h, P.get(pre + "mlp.w1")),
                              P.get(pre + "mlp.b1"));
        mlp = ops::gelu(mlp);
        mlp = ops::add_rowvec(ops::matmul(mlp, P.get(pre + "mlp.w2")),
                              P.get(pre + "mlp.b2"));
      }
      x = ops::add(x, mlp);
      (void)dh;
    }

    Tensor<T> out =
        ops::layer_norm_rows(x, P.get("dec.ln.g"), P.get("dec.ln.b"));
    return ops::add_rowvec(ops::matmul(out, P.get("dec.head.w")),
                           P.get("dec.head.b"));
  }

  // context-embedding row for a label class (charset index or EOS class)
  int context_embed_row(int class_id) const {
    if (class_id >= 0 && class_id < charset_size_) return class_id;
    if (class_id == charset_size_) return charset_size_ + 1;  // EOS row
    throw VocabError("context class " + std::to_string(class_id) +
                     " out of range [0, " + std::to_string(charset_size_) +
                     "]");
  }

 private:
  int check_position(int p) const {
    if (p < 1 || p > max_len_ + 1)
      throw ShapeError("position " + std::to_string(p) + " out of [1, " +
                       std::to_string(max_len_ + 1) + "]");
    return p;
  }

  Tensor<T> run_cross_attention(const std::string& prefix, int blk, int layer,
                                const Tensor<T>& q_in, const Tensor<T>& kv_in,
                                const std::vector<DecodeItem<T>>& items,
                                const std::vector<Tensor<T>>& masks,
                                const std::vector<int>& q_off,
                                const std::vector<int>& c_off,
                                int tokens_per_image, bool over_vision,
                                AttnRecorder<T>* rec) const {
    auto& P = *params_;
    Tensor<T> q_all = ops::add_rowvec(ops::matmul(q_in, P.get(prefix + ".wq.w")),
                                      P.get(prefix + ".wq.b"));
    Tensor<T> kv_all = ops::add_rowvec(
        ops::matmul(kv_in, P.get(prefix + ".wkv.w")), P.get(prefix + ".wkv.b"));

    const int dh = cfg_.head_dim();
    std::vector<Tensor<T>> item_outs;
    item_outs.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& it = items[i];
      const int tq = q_off[i + 1] - q_off[i];
      Tensor<T> q_rows = ops::slice_rows(q_all, q_off[i], tq);
      Tensor<T> kv_rows =
          over_vision
              ? ops::slice_rows(kv_all, it.vision_index * tokens_per_image,
                                tokens_per_image)
              : ops::slice_rows(kv_all, c_off[i], c_off[i + 1] - c_off[i]);
      const Tensor<T>* mask = over_vision ? nullptr : &masks[i];
      std::vector<Tensor<T>> head_outs;
      head_outs.reserve(static_cast<std::size_t>(cfg_.heads));
      for (int hd = 0; hd < cfg_.heads; ++hd) {
        Tensor<T> q = ops::slice_cols(q_rows, hd * dh, dh);
        Tensor<T> k = ops::slice_cols(kv_rows, hd * dh, dh);
        Tensor<T> v = ops::slice_cols(kv_rows, cfg_.dim + hd * dh, dh);
        Tensor<T> map;
        Tensor<T> out;
        if (cfg_.differential) {
          DiffHeadParams<T> dp;
          dp.lq1 = P.get(prefix + ".lq1");
          dp.lk1 = P.get(prefix + ".lk1");
          dp.lq2 = P.get(prefix + ".lq2");
          dp.lk2 = P.get(prefix + ".lk2");
          dp.rms_gain = ops::slice_vec(P.get(prefix + ".rms.g"), hd * dh, dh);
          dp.lambda_init = lambda_init_for_block(blk + 1);
          out = diff_attention_head(q, k, v, mask, dp, rec ? &map : nullptr);
        } else {
          out = std_attention_head(q, k, v, mask, rec ? &map : nullptr);
        }
        if (rec)
          detail::record_map(rec, blk, layer, static_cast<int>(i), hd, map);
        head_outs.push_back(out);
      }
      item_outs.push_back(ops::concat_cols(head_outs));
    }
    Tensor<T> merged = ops::concat_rows(item_outs);
    return ops::add_rowvec(ops::matmul(merged, P.get(prefix + ".wo.w")),
                           P.get(prefix + ".wo.b"));
  }

  DecoderConfig cfg_;
  int charset_size_;
  int max_len_;
  ParamSet<T>* params_;
};

}  // namespace pldlab
