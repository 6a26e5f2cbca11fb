#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pldlab/config.hpp"

namespace pldlab {

enum class InitKind {
  kZero,          // biases
  kOne,           // norm gains
  kTruncNormal,   // weights / embeddings, std 0.02 truncated at 2 std
  kLambdaNoise,   // differential-attention lambda vectors, normal std 0.1
};

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  InitKind init;

  std::int64_t size() const {
    std::int64_t s = 1;
    for (int d : shape) s *= d;
    return s;
  }
};

// The complete, ordered parameter inventory of each model. Model
// construction consumes these same lists, so count_params() is exact by
// construction rather than a parallel bookkeeping exercise.
std::vector<ParamSpec> encoder_param_specs(const EncoderConfig& cfg);
std::vector<ParamSpec> decoder_param_specs(const DecoderConfig& cfg,
                                           int charset_size,
                                           int max_label_len);

std::int64_t count_params(const std::vector<ParamSpec>& specs);

// Inference cost model, in FLOPs (not GFLOPs). Multiply-accumulates count as
// 2 FLOPs; softmax, normalization and activation evaluations count 5 FLOPs
// per element; plain elementwise adds are not charged. The decoder model is
// autoregressive greedy decoding WITHOUT kv caching: at step s (1-based) one
// query attends to s context rows (BOS + s-1 previous characters) and all
// vision tokens, and every projection is recomputed. A label of length L
// takes L + 2 steps (the leading BOS feed and the trailing EOS step are both
// decoded). Fractional L interpolates linearly in the final step.
double encoder_flops(const EncoderConfig& cfg);
double decoder_flops(const DecoderConfig& cfg, int charset_size,
                     double label_len, int num_vision_tokens);

}  // namespace pldlab
