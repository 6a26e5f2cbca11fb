#include <cstring>
#include <vector>

#include <doctest.h>

#include "grad_check.hpp"
#include "pldlab/counters.hpp"
#include "pldlab/dataset.hpp"
#include "pldlab/encoder.hpp"

using namespace pldlab;
using pldlab::testing::grad_check;

namespace {

// tiny config for gradient checking: 16x16 image, patch 8 -> 4 tokens
EncoderConfig tiny_config() {
  EncoderConfig c;
  c.name = "tiny";
  c.blocks = 1;
  c.dim = 8;
  c.heads = 2;
  c.patch = 8;
  c.image_h = 16;
  c.image_w = 16;
  c.channels = 1;
  return c;
}

GlyphSample fake_image(int h, int w, std::uint64_t seed) {
  GlyphSample s;
  s.h = static_cast<std::uint16_t>(h);
  s.w = static_cast<std::uint16_t>(w);
  s.pixels.resize(static_cast<std::size_t>(h) * w);
  Rng rng(seed);
  for (auto& p : s.pixels)
    p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  s.clean = {0};
  s.noisy = {0};
  return s;
}

}  // namespace

TEST_CASE("encoder output shape and determinism") {
  EncoderConfig cfg = encoder_preset("uvit-t");
  ParamSet<float> params;
  params.build(encoder_param_specs(cfg), Rng(3));
  VitEncoder<float> enc(cfg, params);
  CHECK(enc.num_tokens() == (32 / 8) * (64 / 8));

  GlyphSample a = fake_image(32, 64, 1), b = fake_image(32, 64, 2);
  Tensor<float> out1 = enc.forward({&a, &b});
  CHECK(out1.dim(0) == 2 * enc.num_tokens());
  CHECK(out1.dim(1) == cfg.dim);
  Tensor<float> out2 = enc.forward({&a, &b});
  CHECK(std::memcmp(out1.data(), out2.data(),
                    sizeof(float) * static_cast<std::size_t>(out1.size())) ==
        0);
}

TEST_CASE("encoder rows are independent of batch composition") {
  EncoderConfig cfg = encoder_preset("uvit-t");
  ParamSet<float> params;
  params.build(encoder_param_specs(cfg), Rng(3));
  VitEncoder<float> enc(cfg, params);
  const int n = enc.num_tokens();

  GlyphSample a = fake_image(32, 64, 5), b = fake_image(32, 64, 6);
  Tensor<float> ab = enc.forward({&a, &b});
  Tensor<float> ba = enc.forward({&b, &a});
  Tensor<float> solo = enc.forward({&a});

  const std::size_t block = sizeof(float) * std::size_t(n) * cfg.dim;
  // a's rows: first group of ab, second group of ba, only group of solo
  CHECK(std::memcmp(ab.data(), ba.data() + std::int64_t(n) * cfg.dim, block) ==
        0);
  CHECK(std::memcmp(ab.data(), solo.data(), block) == 0);
  CHECK(std::memcmp(ab.data() + std::int64_t(n) * cfg.dim, ba.data(), block) ==
        0);
}

TEST_CASE("encoder rejects wrong geometry") {
  EncoderConfig cfg = encoder_preset("uvit-t");
  ParamSet<float> params;
  params.build(encoder_param_specs(cfg), Rng(3));
  VitEncoder<float> enc(cfg, params);
  GlyphSample wrong = fake_image(32, 32, 1);
  CHECK_THROWS_AS(enc.forward({&wrong}), DataError);
  CHECK_THROWS_AS(enc.forward({}), DataError);

  // full-size RGB presets cannot consume grayscale glyphs
  EncoderConfig rgb = encoder_preset("vit-t");
  ParamSet<float> rgb_params;
  rgb_params.build(encoder_param_specs(rgb), Rng(3));
  VitEncoder<float> rgb_enc(rgb, rgb_params);
  GlyphSample big = fake_image(224, 224, 1);
  CHECK_THROWS_AS(rgb_enc.forward({&big}), ConfigError);
}

TEST_CASE("encoder gradients pass finite differences") {
  EncoderConfig cfg = tiny_config();
  ParamSet<double> params;
  params.build(encoder_param_specs(cfg), Rng(17));
  VitEncoder<double> enc(cfg, params);
  GlyphSample img = fake_image(16, 16, 9);

  // distinct weights make every output element matter
  const int rows = cfg.num_patches(), cols = cfg.dim;
  std::vector<double> wv(static_cast<std::size_t>(rows) * cols);
  Rng wr(5);
  for (auto& v : wv) v = wr.uniform(-1.0, 1.0);
  Tensor<double> weights = Tensor<double>::from({rows, cols}, std::move(wv));

  std::vector<Tensor<double>> inputs;
  for (auto& [name, t] : params.items()) inputs.push_back(t);
  grad_check(
      inputs,
      [&](const std::vector<Tensor<double>>&) {
        return ops::sum_all(ops::hadamard(enc.forward({&img}), weights));
      },
      /*tol=*/2e-5, /*h=*/1e-5);
}
