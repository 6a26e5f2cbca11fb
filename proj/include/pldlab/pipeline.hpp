#pragma once

#include <optional>
#include <utility>

#include "pldlab/decoder.hpp"
#include "pldlab/encoder.hpp"
#include "pldlab/model.hpp"
#include "pldlab/vocab.hpp"

namespace pldlab {

// Full recognizer: one parameter set shared by a ViT encoder and a PLD
// decoder. Deliberately neither copyable nor movable: the sub-modules hold a
// pointer into params_.
template <class T>
class Model {
 public:
  Model(const EncoderConfig& ec, const DecoderConfig& dc, Vocab vocab,
        std::uint64_t init_seed)
      : vocab_(std::move(vocab)) {
    if (ec.dim != dc.dim)
      throw ConfigError("encoder dim " + std::to_string(ec.dim) +
                        " != decoder dim " + std::to_string(dc.dim) +
                        "; vision tokens feed the decoder directly");
    auto specs = encoder_param_specs(ec);
    auto dspecs = decoder_param_specs(dc, vocab_.charset_size(), kMaxLabelLen);
    specs.insert(specs.end(), dspecs.begin(), dspecs.end());
    params_.build(specs, Rng(init_seed));
    encoder_.emplace(ec, params_);
    decoder_.emplace(dc, vocab_.charset_size(), kMaxLabelLen, params_);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = delete;

  VitEncoder<T>& encoder() { return *encoder_; }
  const VitEncoder<T>& encoder() const { return *encoder_; }
  PldDecoder<T>& decoder() { return *decoder_; }
  const PldDecoder<T>& decoder() const { return *decoder_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  const Vocab& vocab() const { return vocab_; }
  std::int64_t total_params() const { return params_.total_params(); }

 private:
  Vocab vocab_;
  ParamSet<T> params_;
  std::optional<VitEncoder<T>> encoder_;
  std::optional<PldDecoder<T>> decoder_;
};

}  // namespace pldlab
