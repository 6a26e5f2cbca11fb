#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pldlab/errors.hpp"

namespace pldlab {

struct EncoderConfig {
  std::string name;
  int blocks = 0;
  int dim = 0;
  int heads = 0;
  int patch = 16;
  int image_h = 224;
  int image_w = 224;
  int channels = 3;

  int head_dim() const { return dim / heads; }
  int num_patches() const { return (image_h / patch) * (image_w / patch); }
  void validate() const;
};

struct DecoderConfig {
  std::string name;
  int blocks = 0;
  int dim = 0;
  int heads = 0;
  bool differential = false;

  int head_dim() const { return dim / heads; }
  // both MLP variants use a 4x hidden size; the differential decoder's
  // SwiGLU has three weight matrices (12 d^2) vs GELU's two (8 d^2)
  int mlp_hidden() const { return 4 * dim; }
  void validate() const;
};

// Differential attention lambda schedule; l is the 1-based block index.
inline double lambda_init_for_block(int l) {
  return 0.8 - 0.6 * std::exp(-0.3 * (l - 1));
}

// Presets. vit-* are the full-size encoders (224x224, patch 16, RGB);
// uvit-* are desk-scale variants for 32x64 grayscale glyph images.
// pld-* / upld-* decoders follow the same split. upld heads keep the head
// dim at 32 so the differential halves stay even.
EncoderConfig encoder_preset(const std::string& name);
DecoderConfig decoder_preset(const std::string& name);
std::vector<std::string> encoder_preset_names();
std::vector<std::string> decoder_preset_names();

}  // namespace pldlab
