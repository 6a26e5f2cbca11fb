#include <cmath>
#include <cstring>
#include <string>

#include <doctest.h>

#include "pldlab/counters.hpp"
#include "pldlab/pipeline.hpp"

using namespace pldlab;

namespace {

double rel_err(double got, double want) {
  return std::abs(got - want) / want;
}

std::int64_t enc_params(const char* name) {
  return count_params(encoder_param_specs(encoder_preset(name)));
}

std::int64_t dec_params(const char* name) {
  return count_params(
      decoder_param_specs(decoder_preset(name), 94, kMaxLabelLen));
}

}  // namespace

TEST_CASE("encoder parameter counts match the published sizes within 5%") {
  CHECK(rel_err(double(enc_params("vit-t")), 5.5e6) < 0.05);
  CHECK(rel_err(double(enc_params("vit-s")), 21.7e6) < 0.05);
  CHECK(rel_err(double(enc_params("vit-b")), 85.8e6) < 0.05);
}

TEST_CASE("decoder parameter counts match the published sizes within 5%") {
  CHECK(rel_err(double(dec_params("pld-t")), 2.5e6) < 0.05);
  CHECK(rel_err(double(dec_params("pld-s")), 9.6e6) < 0.05);
  CHECK(rel_err(double(dec_params("pld-b")), 19.1e6) < 0.05);
  CHECK(rel_err(double(dec_params("pld-l")), 28.8e6) < 0.05);
  CHECK(rel_err(double(dec_params("pld-diff")), 24.4e6) < 0.05);

  // the differential variant adds its published increment over the base
  const double diff_extra = double(dec_params("pld-diff") - dec_params("pld-b"));
  CHECK(rel_err(diff_extra, 5.3e6) < 0.15);  // 24.4M - 19.1M
}

TEST_CASE("encoder flops match the published numbers within 15%") {
  CHECK(rel_err(encoder_flops(encoder_preset("vit-t")), 2.2e9) < 0.15);
  CHECK(rel_err(encoder_flops(encoder_preset("vit-s")), 8.6e9) < 0.15);
  CHECK(rel_err(encoder_flops(encoder_preset("vit-b")), 33.9e9) < 0.15);
}

TEST_CASE("decoder flops at L=5.5 match the published numbers within 15%") {
  const int n = encoder_preset("vit-b").num_patches();
  REQUIRE(n == 196);
  auto gf = [&](const char* name) {
    return decoder_flops(decoder_preset(name), 94, 5.5, n);
  };
  CHECK(rel_err(gf("pld-t"), 0.8e9) < 0.15);
  CHECK(rel_err(gf("pld-s"), 3.5e9) < 0.15);
  CHECK(rel_err(gf("pld-b"), 7.0e9) < 0.15);
  CHECK(rel_err(gf("pld-l"), 12.5e9) < 0.15);
  CHECK(rel_err(gf("pld-diff"), 7.1e9) < 0.15);
}

TEST_CASE("decoder flops are strictly monotone in the label length") {
  const int n = 196;
  const DecoderConfig dc = decoder_preset("pld-b");
  double prev = 0.0;
  for (int len = 1; len <= 20; ++len) {
    const double f = decoder_flops(dc, 94, double(len), n);
    CHECK(f > prev);
    prev = f;
  }
  // fractional lengths interpolate the final step linearly
  const double f5 = decoder_flops(dc, 94, 5.0, n);
  const double f55 = decoder_flops(dc, 94, 5.5, n);
  const double f6 = decoder_flops(dc, 94, 6.0, n);
  CHECK(f55 == doctest::Approx(f5 + 0.5 * (f6 - f5)).epsilon(1e-12));
  CHECK(f5 < f55);
  CHECK(f55 < f6);
}

TEST_CASE("encoder flops do not depend on the decoded length") {
  // the encoder runs once per image regardless of label length; its cost
  // function takes no length argument, and pairing it with any decoder
  // leaves the encoder share constant
  const EncoderConfig ec = encoder_preset("vit-s");
  const DecoderConfig dc = decoder_preset("pld-s");
  const double enc = encoder_flops(ec);
  for (double len : {1.0, 5.5, 20.0}) {
    const double total = enc + decoder_flops(dc, 94, len, ec.num_patches());
    CHECK(total - decoder_flops(dc, 94, len, ec.num_patches()) ==
          doctest::Approx(enc));
  }
}

TEST_CASE("config validation rejects broken shapes") {
  EncoderConfig ec = encoder_preset("uvit-s");
  ec.heads = 5;  // dim 128 not divisible
  CHECK_THROWS_AS(ec.validate(), ConfigError);
  EncoderConfig ep = encoder_preset("uvit-s");
  ep.patch = 7;  // 32x64 not divisible by 7
  CHECK_THROWS_AS(ep.validate(), ConfigError);
  DecoderConfig dc = decoder_preset("upld-diff");
  dc.heads = 64;  // head dim 2 -> halves of width 1 are allowed; 128/64=2 ok
  dc.validate();
  dc.dim = 126;  // not divisible by heads
  CHECK_THROWS_AS(dc.validate(), ConfigError);
  CHECK_THROWS_AS(encoder_preset("vit-xxl"), ConfigError);
  CHECK_THROWS_AS(decoder_preset("pld-xxl"), ConfigError);
}

TEST_CASE("desk-scale presets are well formed") {
  for (const auto& name : encoder_preset_names()) {
    EncoderConfig ec = encoder_preset(name);
    ec.validate();
    CHECK(count_params(encoder_param_specs(ec)) > 0);
  }
  for (const auto& name : decoder_preset_names()) {
    DecoderConfig dc = decoder_preset(name);
    dc.validate();
    CHECK(count_params(decoder_param_specs(dc, 40, kMaxLabelLen)) > 0);
    if (dc.differential) CHECK(dc.head_dim() % 2 == 0);
  }
}

TEST_CASE("a built model owns exactly the declared parameters") {
  EncoderConfig ec = encoder_preset("uvit-t");
  DecoderConfig dc = decoder_preset("upld-t");
  Vocab v = Vocab::toy40();
  Model<float> m(ec, dc, v, 123);
  const std::int64_t expect =
      count_params(encoder_param_specs(ec)) +
      count_params(decoder_param_specs(dc, v.charset_size(), kMaxLabelLen));
  CHECK(m.total_params() == expect);

  for (const auto& spec : encoder_param_specs(ec)) {
    REQUIRE(m.params().has(spec.name));
    CHECK(m.params().get(spec.name).size() == spec.size());
  }
}

TEST_CASE("initialization is keyed by parameter name") {
  // the same named parameter gets the same bits no matter what else exists;
  // upld-b and upld-l share dim/heads and differ only in depth, so every
  // upld-b parameter name also exists (same shape) in upld-l
  auto specs_small = decoder_param_specs(decoder_preset("upld-b"), 40, 25);
  auto specs_large = decoder_param_specs(decoder_preset("upld-l"), 40, 25);
  ParamSet<float> a, b;
  a.build(specs_small, Rng(7));
  b.build(specs_large, Rng(7));
  for (const auto& spec : specs_small) {
    const auto& ta = a.get(spec.name);
    const auto& tb = b.get(spec.name);
    REQUIRE(ta.size() == tb.size());
    CHECK(std::memcmp(ta.data(), tb.data(),
                      sizeof(float) * static_cast<std::size_t>(ta.size())) ==
          0);
  }
  // and different seeds produce different weights
  ParamSet<float> c;
  c.build(specs_small, Rng(8));
  const auto& w7 = a.get("dec.head.w");
  const auto& w8 = c.get("dec.head.w");
  CHECK(std::memcmp(w7.data(), w8.data(),
                    sizeof(float) * static_cast<std::size_t>(w7.size())) != 0);
}

TEST_CASE("init kinds hit their distributions") {
  std::vector<ParamSpec> specs;
  specs.push_back({"w", {200, 50}, InitKind::kTruncNormal});
  specs.push_back({"g", {64}, InitKind::kOne});
  specs.push_back({"b", {64}, InitKind::kZero});
  specs.push_back({"l", {4096}, InitKind::kLambdaNoise});
  ParamSet<double> p;
  p.build(specs, Rng(11));
  const auto& w = p.get("w");
  double mx = 0, sum = 0, sum2 = 0;
  for (std::int64_t i = 0; i < w.size(); ++i) {
    mx = std::max(mx, std::abs(w.data()[i]));
    sum += w.data()[i];
    sum2 += w.data()[i] * w.data()[i];
  }
  CHECK(mx <= 0.04);  // truncated at 2 sigma
  CHECK(std::abs(sum / double(w.size())) < 0.002);
  const double std = std::sqrt(sum2 / double(w.size()));
  CHECK(std == doctest::Approx(0.02).epsilon(0.15));
  for (std::int64_t i = 0; i < 64; ++i) {
    CHECK(p.get("g").data()[i] == 1.0);
    CHECK(p.get("b").data()[i] == 0.0);
  }
  double lsum2 = 0;
  for (std::int64_t i = 0; i < 4096; ++i)
    lsum2 += p.get("l").data()[i] * p.get("l").data()[i];
  CHECK(std::sqrt(lsum2 / 4096.0) == doctest::Approx(0.1).epsilon(0.1));
}
