#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "pldlab/pipeline.hpp"

namespace pldlab {

// Everything needed to rebuild a model before its weights are overwritten
// from the tensor table, plus bookkeeping for resumed/derived runs. `extra`
// is a free-form JSON object (serialized) for run-specific knobs.
struct CheckpointMeta {
  EncoderConfig encoder;
  DecoderConfig decoder;
  std::string vocab_chars;
  int max_label_len = kMaxLabelLen;
  std::uint64_t init_seed = 0;
  int step = 0;
  std::string extra;
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::unique_ptr<Model<float>> model;
};

// PLDC container: JSON header followed by named f32 tensors.
void save_checkpoint(const std::string& path, const Model<float>& m,
                     const CheckpointMeta& meta);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace pldlab
