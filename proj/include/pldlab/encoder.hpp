#pragma once

#include <cmath>
#include <vector>

#include "pldlab/config.hpp"
#include "pldlab/dataset.hpp"
#include "pldlab/model.hpp"
#include "pldlab/ops.hpp"

namespace pldlab {

// Plain pre-norm ViT: patch embedding + learned positional embeddings, no
// class token, standard multi-head self-attention, GELU MLP, final norm.
// Works on a batch of images at once; the output keeps samples stacked as
// consecutive row groups of num_tokens() rows each.
template <class T>
class VitEncoder {
 public:
  VitEncoder(EncoderConfig cfg, ParamSet<T>& params)
      : cfg_(std::move(cfg)), params_(&params) {
    cfg_.validate();
  }

  const EncoderConfig& config() const { return cfg_; }
  int num_tokens() const { return cfg_.num_patches(); }

  // batch of H x W grayscale samples -> [B * num_tokens, dim]
  Tensor<T> forward(const std::vector<const GlyphSample*>& batch) const {
    if (batch.empty()) throw DataError("encoder forward: empty batch");
    if (cfg_.channels != 1)
      throw ConfigError("glyph images are grayscale; encoder '" + cfg_.name +
                        "' wants " + std::to_string(cfg_.channels) +
                        " channels");
    const int ph = cfg_.image_h / cfg_.patch, pw = cfg_.image_w / cfg_.patch;
    const int n = cfg_.num_patches();
    const int pd = cfg_.patch * cfg_.patch * cfg_.channels;
    const int b = static_cast<int>(batch.size());

    Tensor<T> patches = Tensor<T>::zeros({b * n, pd});
    for (int s = 0; s < b; ++s) {
      const GlyphSample& img = *batch[static_cast<std::size_t>(s)];
      if (img.h != cfg_.image_h || img.w != cfg_.image_w)
        throw DataError("image " + std::to_string(img.w) + "x" +
                        std::to_string(img.h) + " does not match encoder " +
                        std::to_string(cfg_.image_w) + "x" +
                        std::to_string(cfg_.image_h));
      for (int py = 0; py < ph; ++py)
        for (int px = 0; px < pw; ++px) {
          T* row = patches.data() +
                   (std::int64_t(s) * n + py * pw + px) * pd;
          for (int y = 0; y < cfg_.patch; ++y)
            for (int x = 0; x < cfg_.patch; ++x) {
              const int iy = py * cfg_.patch + y, ix = px * cfg_.patch + x;
              row[y * cfg_.patch + x] =
                  static_cast<T>(img.pixels[std::size_t(iy) * img.w + ix]) /
                      T(127.5) -
                  T(1);
            }
        }
    }

    auto& P = *params_;
    Tensor<T> x = ops::add_rowvec(ops::matmul(patches, P.get("enc.patch.w")),
                                  P.get("enc.patch.b"));
    x = ops::add_tile_rows(x, P.get("enc.pos"));

    const int dh = cfg_.head_dim();
    const T scale = T(1) / std::sqrt(T(dh));
    for (int blk = 0; blk < cfg_.blocks; ++blk) {
      const std::string pre = "enc.b" + std::to_string(blk) + ".";
      Tensor<T> h = ops::layer_norm_rows(x, P.get(pre + "ln1.g"),
                                         P.get(pre + "ln1.b"));
      Tensor<T> qkv = ops::add_rowvec(ops::matmul(h, P.get(pre + "qkv.w")),
                                      P.get(pre + "qkv.b"));
      std::vector<Tensor<T>> sample_outs;
      sample_outs.reserve(static_cast<std::size_t>(b));
      for (int s = 0; s < b; ++s) {
        Tensor<T> rows = ops::slice_rows(qkv, s * n, n);
        std::vector<Tensor<T>> head_outs;
        head_outs.reserve(static_cast<std::size_t>(cfg_.heads));
        for (int hd = 0; hd < cfg_.heads; ++hd) {
          Tensor<T> q = ops::slice_cols(rows, hd * dh, dh);
          Tensor<T> k = ops::slice_cols(rows, cfg_.dim + hd * dh, dh);
          Tensor<T> v = ops::slice_cols(rows, 2 * cfg_.dim + hd * dh, dh);
          Tensor<T> att = ops::softmax_rows(ops::scale(ops::matmul_nt(q, k), scale));
          head_outs.push_back(ops::matmul(att, v));
        }
        sample_outs.push_back(ops::concat_cols(head_outs));
      }
      Tensor<T> attn_out = ops::concat_rows(sample_outs);
      attn_out = ops::add_rowvec(ops::matmul(attn_out, P.get(pre + "proj.w")),
                                 P.get(pre + "proj.b"));
      x = ops::add(x, attn_out);

      Tensor<T> h2 = ops::layer_norm_rows(x, P.get(pre + "ln2.g"),
                                          P.get(pre + "ln2.b"));
      Tensor<T> mlp = ops::add_rowvec(ops::matmul(h2, P.get(pre + "mlp.w1")),
                                      P.get(pre + "mlp.b1"));
      mlp = ops::gelu(mlp);
      mlp = ops::add_rowvec(ops::matmul(mlp, P.get(pre + "mlp.w2")),
                            P.get(pre + "mlp.b2"));
      x = ops::add(x, mlp);
    }
    return ops::layer_norm_rows(x, P.get("enc.ln.g"), P.get("enc.ln.b"));
  }

 private:
  EncoderConfig cfg_;
  ParamSet<T>* params_;
};

}  // namespace pldlab
