#include "pldlab/permutation.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "pldlab/errors.hpp"

namespace pldlab {

namespace {
constexpr float kDeny = -1e9f;
}

PermutationPlan compile_plan(std::vector<int> perm) {
  const int t = static_cast<int>(perm.size());
  if (t < 1) throw DataError("empty permutation");
  std::vector<char> seen(static_cast<std::size_t>(t), 0);
  for (int p : perm) {
    if (p < 1 || p > t)
      throw DataError("permutation entry " + std::to_string(p) +
                      " outside [1, " + std::to_string(t) + "]");
    if (seen[static_cast<std::size_t>(p - 1)]++)
      throw DataError("permutation repeats position " + std::to_string(p));
  }
  PermutationPlan plan;
  plan.perm = std::move(perm);
  plan.mask.assign(static_cast<std::size_t>(t) * (t + 1), kDeny);
  for (int row = 0; row < t; ++row) {
    float* m = plan.mask.data() + static_cast<std::size_t>(row) * (t + 1);
    m[0] = 0.0f;  // BOS
    for (int prev = 0; prev < row; ++prev) m[plan.perm[prev]] = 0.0f;
  }
  return plan;
}

std::vector<PermutationPlan> sample_permutations(int t, int k_random,
                                                 Rng& rng) {
  if (t < 1) throw DataError("sample_permutations: T must be >= 1");
  if (k_random < 0) throw DataError("negative k_random");
  std::vector<int> identity(static_cast<std::size_t>(t));
  std::iota(identity.begin(), identity.end(), 1);
  std::vector<int> reverse(identity.rbegin(), identity.rend());

  std::vector<PermutationPlan> plans;
  plans.push_back(compile_plan(identity));
  if (t >= 2) plans.push_back(compile_plan(reverse));
  if (t <= 2) return plans;  // identity/reverse exhaust the useful set

  for (int i = 0; i < k_random; ++i) {
    std::vector<int> p = identity;
    // Fisher-Yates
    for (int j = t - 1; j > 0; --j) {
      const int pick = static_cast<int>(rng.uniform_int(0, j));
      std::swap(p[static_cast<std::size_t>(j)], p[static_cast<std::size_t>(pick)]);
    }
    plans.push_back(compile_plan(std::move(p)));
  }
  return plans;
}

std::vector<float> cloze_mask(int t) {
  if (t < 1) throw DataError("cloze_mask: T must be >= 1");
  std::vector<float> m(static_cast<std::size_t>(t) * (t + 1), 0.0f);
  for (int row = 0; row < t; ++row)
    m[static_cast<std::size_t>(row) * (t + 1) + row + 1] = kDeny;
  return m;
}

}  // namespace pldlab
