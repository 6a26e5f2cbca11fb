#include "pldlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "binio.hpp"
#include "pldlab/errors.hpp"
#include "pldlab/font5x7.hpp"

namespace pldlab {

// --------------------------------------------------------------- noise model

double NoiseSpec::any_rate() const {
  return 1.0 - (1.0 - p_substitute) * (1.0 - p_delete) * (1.0 - p_insert) *
                   (1.0 - p_truncate);
}

NoiseSpec scaled_noise(double target_rate, std::uint64_t seed) {
  if (target_rate < 0.0 || target_rate >= 1.0)
    throw ConfigError("noise rate must be in [0, 1), got " +
                      std::to_string(target_rate));
  NoiseSpec base;
  base.seed = seed;
  const double pmax = std::max({base.p_substitute, base.p_delete,
                                base.p_insert, base.p_truncate});
  auto rate_at = [&](double s) {
    return 1.0 - (1.0 - s * base.p_substitute) * (1.0 - s * base.p_delete) *
                     (1.0 - s * base.p_insert) * (1.0 - s * base.p_truncate);
  };
  const double s_hi = 1.0 / pmax;  // largest scale keeping every p <= 1
  if (target_rate > rate_at(s_hi))
    throw ConfigError("noise rate " + std::to_string(target_rate) +
                      " not reachable by scaling the per-op probabilities");
  // rate_at is strictly increasing in s; bisect
  double lo = 0.0, hi = s_hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rate_at(mid) < target_rate ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  NoiseSpec out = base;
  out.p_substitute *= s;
  out.p_delete *= s;
  out.p_insert *= s;
  out.p_truncate *= s;
  return out;
}

std::vector<int> corrupt_label(const Vocab& vocab,
                               const std::vector<int>& clean,
                               const NoiseSpec& spec,
                               std::uint64_t sample_index, bool* changed) {
  if (clean.empty()) throw DataError("corrupt_label: empty label");
  Rng rng = Rng(spec.seed).substream("noise", sample_index);
  std::vector<int> label = clean;
  const int nc = vocab.charset_size();

  if (rng.bernoulli(spec.p_substitute)) {
    const auto pos = rng.uniform_int(0, static_cast<std::int64_t>(label.size()) - 1);
    if (nc > 1) {
      // replace with a different character, always an actual change
      int repl = static_cast<int>(rng.uniform_int(0, nc - 2));
      if (repl >= label[pos]) ++repl;
      label[pos] = repl;
    }
  }
  if (rng.bernoulli(spec.p_delete) && label.size() > 1) {
    const auto pos = rng.uniform_int(0, static_cast<std::int64_t>(label.size()) - 1);
    label.erase(label.begin() + pos);
  }
  if (rng.bernoulli(spec.p_insert) &&
      label.size() < static_cast<std::size_t>(kMaxLabelLen)) {
    const auto pos = rng.uniform_int(0, static_cast<std::int64_t>(label.size()));
    label.insert(label.begin() + pos,
                 static_cast<int>(rng.uniform_int(0, nc - 1)));
  }
  if (rng.bernoulli(spec.p_truncate) && label.size() > 1) {
    const auto keep = rng.uniform_int(1, static_cast<std::int64_t>(label.size()) - 1);
    label.resize(static_cast<std::size_t>(keep));
  }

  if (changed) *changed = (label != clean);
  return label;
}

// ----------------------------------------------------------------- rendering

GlyphSample render_glyphs(const Vocab& vocab, const std::string& text,
                          std::uint64_t style_seed, int img_h, int img_w) {
  if (text.empty()) throw DataError("render_glyphs: empty text");
  if (static_cast<int>(text.size()) > kMaxLabelLen)
    throw DataError("render_glyphs: text length " +
                    std::to_string(text.size()) + " exceeds max " +
                    std::to_string(kMaxLabelLen));
  GlyphSample s;
  s.h = static_cast<std::uint16_t>(img_h);
  s.w = static_cast<std::uint16_t>(img_w);
  s.clean = vocab.encode(text);  // validates charset membership
  s.noisy = s.clean;

  const int len = static_cast<int>(text.size());
  // cell = 5 glyph columns + 1 gap column, all scaled; last gap dropped
  const int max_scale_w = (img_w - 2) / (6 * len);
  const int max_scale_h = (img_h - 4) / (kGlyphH + 1);
  const int smax = std::min({max_scale_w, max_scale_h, 3});
  if (smax < 1)
    throw DataError("render_glyphs: text '" + text + "' does not fit a " +
                    std::to_string(img_w) + "x" + std::to_string(img_h) +
                    " image");

  Rng rng = Rng(style_seed).substream("style", fnv1a64(text));
  const int scale = static_cast<int>(rng.uniform_int(1, smax));
  const int text_w = len * 6 * scale - scale;
  const int text_h = kGlyphH * scale;
  const int x0 = static_cast<int>(rng.uniform_int(1, img_w - 1 - text_w));
  const int y0 = static_cast<int>(rng.uniform_int(1, img_h - 1 - text_h));
  const double shear = rng.uniform(-0.25, 0.25);
  std::vector<int> jitter_y(len);
  for (auto& j : jitter_y) j = static_cast<int>(rng.uniform_int(-1, 1));
  const double ink = rng.uniform(170.0, 250.0);
  const double bg = rng.uniform(8.0, 48.0);
  const double bg_sigma = rng.uniform(2.0, 10.0);
  const double poisson_scale = rng.uniform(0.0, 0.35);
  const double blur_sigma = rng.uniform(0.0, 1.5);

  std::vector<double> img(static_cast<std::size_t>(img_h) * img_w);
  for (auto& v : img) v = bg + bg_sigma * rng.gaussian();

  // stamp glyphs (scale x scale blocks per dot, per-row shear offset)
  for (int ci = 0; ci < len; ++ci) {
    const unsigned char* g = glyph5x7(text[static_cast<std::size_t>(ci)]);
    const int cx = x0 + ci * 6 * scale;
    const int cy = y0 + jitter_y[static_cast<std::size_t>(ci)];
    for (int gx = 0; gx < kGlyphW; ++gx)
      for (int gy = 0; gy < kGlyphH; ++gy) {
        if (!((g[gx] >> gy) & 1)) continue;
        for (int sy = 0; sy < scale; ++sy) {
          const int y = cy + gy * scale + sy;
          if (y < 0 || y >= img_h) continue;
          const int shift =
              static_cast<int>(std::lround(shear * (y - y0)));
          for (int sx = 0; sx < scale; ++sx) {
            const int x = cx + gx * scale + sx + shift;
            if (x < 0 || x >= img_w) continue;
            img[static_cast<std::size_t>(y) * img_w + x] = ink;
          }
        }
      }
  }

  // photon-ish noise: sigma grows with sqrt(intensity)
  for (auto& v : img)
    v += poisson_scale * std::sqrt(std::max(v, 0.0)) * rng.gaussian();

  // separable gaussian blur, radius 2
  if (blur_sigma > 0.05) {
    double k[5];
    double ksum = 0;
    for (int i = -2; i <= 2; ++i) {
      k[i + 2] = std::exp(-0.5 * (i * i) / (blur_sigma * blur_sigma));
      ksum += k[i + 2];
    }
    for (double& kv : k) kv /= ksum;
    std::vector<double> tmp(img.size());
    for (int y = 0; y < img_h; ++y)
      for (int x = 0; x < img_w; ++x) {
        double acc = 0;
        for (int i = -2; i <= 2; ++i) {
          const int xx = std::clamp(x + i, 0, img_w - 1);
          acc += k[i + 2] * img[static_cast<std::size_t>(y) * img_w + xx];
        }
        tmp[static_cast<std::size_t>(y) * img_w + x] = acc;
      }
    for (int y = 0; y < img_h; ++y)
      for (int x = 0; x < img_w; ++x) {
        double acc = 0;
        for (int i = -2; i <= 2; ++i) {
          const int yy = std::clamp(y + i, 0, img_h - 1);
          acc += k[i + 2] * tmp[static_cast<std::size_t>(yy) * img_w + x];
        }
        img[static_cast<std::size_t>(y) * img_w + x] = acc;
      }
  }

  s.pixels.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i)
    s.pixels[i] = static_cast<std::uint8_t>(
        std::clamp(std::lround(img[i]), 0L, 255L));
  return s;
}

// --------------------------------------------------------------- text source

SynthTextSource::SynthTextSource(const Vocab& vocab, std::uint64_t seed,
                                 int lexicon_size)
    : vocab_(vocab) {
  if (lexicon_size < 1) throw ConfigError("lexicon_size must be positive");
  static const std::string kVowels = "aeiou";
  static const std::string kConsonants = "bcdfghjklmnpqrstvwxyz";
  std::string vowels, consonants;
  for (char c : kVowels)
    if (vocab.contains(c)) vowels.push_back(c);
  for (char c : kConsonants)
    if (vocab.contains(c)) consonants.push_back(c);
  for (char c : std::string("-.!?'\",;:"))
    if (vocab.contains(c)) punct_.push_back(c);
  for (char c : std::string("0123456789"))
    if (vocab.contains(c)) has_digits_ = true;
  if (vowels.empty() || consonants.empty())
    throw ConfigError("charset lacks letters needed for synthetic text");

  Rng rng = Rng(seed).substream("lexicon");
  lexicon_.reserve(static_cast<std::size_t>(lexicon_size));
  while (static_cast<int>(lexicon_.size()) < lexicon_size) {
    const int len = static_cast<int>(rng.uniform_int(2, 8));
    std::string w;
    bool vowel_turn = rng.bernoulli(0.35);
    for (int i = 0; i < len; ++i) {
      // mostly alternating consonant/vowel, with occasional doubling
      const std::string& pool = vowel_turn ? vowels : consonants;
      w.push_back(pool[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);
      if (!rng.bernoulli(0.12)) vowel_turn = !vowel_turn;
    }
    lexicon_.push_back(std::move(w));
  }
}

std::string SynthTextSource::sample(Rng& rng) const {
  std::string text;
  if (has_digits_ && rng.bernoulli(0.15)) {
    const int len = static_cast<int>(rng.uniform_int(2, 5));
    for (int i = 0; i < len; ++i)
      text.push_back(static_cast<char>('0' + rng.uniform_int(0, 9)));
  } else {
    text = lexicon_[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(lexicon_.size()) - 1))];
  }
  if (!punct_.empty() && rng.bernoulli(0.1)) {
    const char p = punct_[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(punct_.size()) - 1))];
    if (rng.bernoulli(0.5) && text.size() + 1 <= 8)
      text.push_back(p);
    else if (p == '-' && text.size() + 1 <= 8)
      text.insert(text.begin() + static_cast<std::ptrdiff_t>(text.size() / 2), p);
    else if (text.size() + 1 <= 8)
      text.push_back(p);
  }
  return text;
}

Dataset make_synth_dataset(const Vocab& vocab, int count, std::uint64_t seed,
                           const NoiseSpec& noise, int img_h, int img_w,
                           int lexicon_size) {
  if (count <= 0) throw ConfigError("dataset size must be positive");
  SynthTextSource source(vocab, seed, lexicon_size);
  Dataset ds;
  ds.vocab = vocab;
  ds.samples.reserve(static_cast<std::size_t>(count));
  Rng pick = Rng(seed).substream("data");
  for (int i = 0; i < count; ++i) {
    const std::string text = source.sample(pick);
    GlyphSample s = render_glyphs(vocab, text, pick.next_u64(), img_h, img_w);
    bool changed = false;
    s.noisy = corrupt_label(vocab, s.clean, noise,
                            static_cast<std::uint64_t>(i), &changed);
    s.corrupted = changed;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// ----------------------------------------------------------------- GLY1 I/O

namespace {

using binio::Reader;
using binio::Writer;

void write_label(Writer& w, const std::vector<int>& label) {
  w.u8(static_cast<std::uint8_t>(label.size()));
  for (int idx : label) w.u8(static_cast<std::uint8_t>(idx));
}

std::vector<int> read_label(Reader& r, int charset_size) {
  const int len = r.u8();
  std::vector<int> out(static_cast<std::size_t>(len));
  for (auto& v : out) {
    const std::uint64_t at = r.offset();
    v = r.u8();
    if (v >= charset_size)
      throw FormatError("label index " + std::to_string(v) +
                            " out of charset range " +
                            std::to_string(charset_size),
                        at);
  }
  return out;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  if (ds.samples.empty()) throw DataError("refusing to write empty dataset");
  Writer w(path);
  w.bytes("GLY1", 4);
  w.u32(1);  // version
  w.u32(static_cast<std::uint32_t>(ds.samples.size()));
  const std::string& cs = ds.vocab.chars();
  w.u8(static_cast<std::uint8_t>(cs.size()));
  w.bytes(cs.data(), cs.size());
  for (const auto& s : ds.samples) {
    if (s.pixels.size() != static_cast<std::size_t>(s.h) * s.w)
      throw DataError("sample pixel buffer does not match its dimensions");
    if (s.clean.empty() || s.clean.size() > static_cast<std::size_t>(kMaxLabelLen) ||
        s.noisy.empty() || s.noisy.size() > static_cast<std::size_t>(kMaxLabelLen))
      throw DataError("sample label length out of [1, " +
                      std::to_string(kMaxLabelLen) + "]");
    w.u16(s.h);
    w.u16(s.w);
    w.bytes(s.pixels.data(), s.pixels.size());
    write_label(w, s.clean);
    write_label(w, s.noisy);
    w.u8(s.corrupted ? 1 : 0);
  }
  if (!w.good()) throw DataError("write failed for '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "GLY1", 4) != 0)
    throw FormatError("bad magic, expected GLY1", 0);
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw FormatError("unsupported dataset version " + std::to_string(version), 4);
  const std::uint32_t count = r.u32();
  if (count == 0) throw FormatError("dataset contains zero samples", 8);
  const int cs_len = r.u8();
  std::string cs(static_cast<std::size_t>(cs_len), '\0');
  r.bytes(cs.data(), cs.size());
  Dataset ds;
  ds.vocab = Vocab::from_chars(cs);
  ds.samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    GlyphSample s;
    s.h = r.u16();
    s.w = r.u16();
    const std::uint64_t at = r.offset();
    if (s.h == 0 || s.w == 0 || std::size_t(s.h) * s.w > (1u << 24))
      throw FormatError("implausible image size " + std::to_string(s.w) + "x" +
                            std::to_string(s.h),
                        at - 4);
    s.pixels.resize(static_cast<std::size_t>(s.h) * s.w);
    r.bytes(s.pixels.data(), s.pixels.size());
    s.clean = read_label(r, ds.vocab.charset_size());
    s.noisy = read_label(r, ds.vocab.charset_size());
    if (s.clean.empty() || s.noisy.empty())
      throw FormatError("empty label in sample " + std::to_string(i), at);
    s.corrupted = r.u8() != 0;
    ds.samples.push_back(std::move(s));
  }
  if (!r.at_eof())
    throw FormatError("trailing bytes after last sample", r.offset());
  return ds;
}

std::vector<float> normalize_image(const GlyphSample& s) {
  std::vector<float> out(s.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(s.pixels[i]) / 127.5f - 1.0f;
  return out;
}

}  // namespace pldlab
