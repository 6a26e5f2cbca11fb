#pragma once

#include <vector>

#include "pldlab/rng.hpp"

namespace pldlab {

// A factorization order over the 1-based positions [1..T] of a padded label
// (T = length + 1; the last slot is EOS, which is permuted like any other
// position). `mask` is the compiled additive attention mask, [T x (T+1)]
// row-major: row t is the query step predicting position perm[t], column 0
// is BOS (always allowed), column 1+j is label position j+1, allowed iff
// that position precedes perm[t] in the permutation.
struct PermutationPlan {
  std::vector<int> perm;
  std::vector<float> mask;
};

// Validates that `perm` is a bijection over [1..T] and compiles its mask.
PermutationPlan compile_plan(std::vector<int> perm);

// The training plan set for a length-T target: identity and reverse orders,
// plus k_random uniformly sampled permutations. For T <= 2 every permutation
// is one of identity/reverse, so duplicates are dropped and the random draws
// are skipped; for T >= 3 occasional duplicates among the random draws are
// kept (they only reweight stochastic plan sampling).
std::vector<PermutationPlan> sample_permutations(int t, int k_random, Rng& rng);

// Cloze mask over [T x (T+1)]: row t sees BOS and every position except its
// own. Used for refinement and for teacher full-context logits.
std::vector<float> cloze_mask(int t);

}  // namespace pldlab
