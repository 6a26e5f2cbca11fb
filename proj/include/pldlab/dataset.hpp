#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pldlab/rng.hpp"
#include "pldlab/vocab.hpp"

namespace pldlab {

struct GlyphSample {
  std::uint16_t h = 0, w = 0;
  std::vector<std::uint8_t> pixels;  // row-major grayscale
  std::vector<int> clean;            // ground-truth label (charset indices)
  std::vector<int> noisy;            // label after annotation noise
  bool corrupted = false;            // noisy != clean
};

struct Dataset {
  Vocab vocab = Vocab::toy40();
  std::vector<GlyphSample> samples;
};

// Per-op probabilities of the label corruption model. Ops are applied
// independently in the fixed order substitute -> delete -> insert ->
// truncate; labels never drop below length 1 or grow past kMaxLabelLen.
struct NoiseSpec {
  double p_substitute = 0.08;
  double p_delete = 0.06;
  double p_insert = 0.03;
  double p_truncate = 0.03;
  std::uint64_t seed = 0;

  // P(label is touched by at least one op)
  double any_rate() const;
};

// Scales all four probabilities by a common factor so that any_rate() ==
// target (target in [0, 1), and reachable while keeping every p <= 1).
NoiseSpec scaled_noise(double target_rate, std::uint64_t seed);

// Rasterizes `text` into a grayscale glyph image. Deterministic in (text,
// style_seed): scale, placement, shear, ink/background levels, sensor noise
// and blur are all drawn from a stream derived from the pair. clean == noisy
// == encode(text) on the returned sample. Throws DataError when the text
// cannot fit the image at unit scale.
GlyphSample render_glyphs(const Vocab& vocab, const std::string& text,
                          std::uint64_t style_seed, int img_h = 32,
                          int img_w = 64);

// Applies the corruption model to a clean label. The stream is derived from
// (spec.seed, sample_index) so corpora are reproducible element-wise.
std::vector<int> corrupt_label(const Vocab& vocab,
                               const std::vector<int>& clean,
                               const NoiseSpec& spec,
                               std::uint64_t sample_index, bool* changed);

// Deterministic word-like text source: a fixed lexicon of `lexicon_size`
// pseudo-words (built once from the seed) plus occasional digit strings and
// punctuation decorations. Pulling texts from a bounded inventory is what
// makes cloze context informative for refinement/distillation.
class SynthTextSource {
 public:
  SynthTextSource(const Vocab& vocab, std::uint64_t seed,
                  int lexicon_size = 512);
  std::string sample(Rng& rng) const;
  const std::vector<std::string>& lexicon() const { return lexicon_; }

 private:
  const Vocab& vocab_;
  std::vector<std::string> lexicon_;
  std::string punct_;  // decoration characters present in the charset
  bool has_digits_ = false;
};

// Renders `count` samples with noisy labels. Sample i uses style stream
// (seed, "style", i) and noise stream (noise.seed, i), so corpora with the
// same parameters are bit-identical.
Dataset make_synth_dataset(const Vocab& vocab, int count, std::uint64_t seed,
                           const NoiseSpec& noise, int img_h = 32,
                           int img_w = 64, int lexicon_size = 512);

// GLY1 container. Little-endian, designed for bit-exact round trips.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

// [0,255] -> [-1,1]
std::vector<float> normalize_image(const GlyphSample& s);

}  // namespace pldlab
