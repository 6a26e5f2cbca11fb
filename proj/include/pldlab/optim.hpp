#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pldlab/errors.hpp"
#include "pldlab/model.hpp"

namespace pldlab {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled, applied to every parameter
  double clip_norm = 0.0;     // 0 disables global-norm clipping
};

// Decoupled-weight-decay Adam over a ParamSet. Moments are kept in double
// regardless of the parameter scalar type; updates walk parameters in
// registration order, so two runs with the same gradients produce the same
// bits.
template <class T>
class AdamW {
 public:
  AdamW(ParamSet<T>& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
    std::size_t total = 0;
    for (const auto& [name, t] : params_.items())
      total += static_cast<std::size_t>(t.size());
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  }

  int step_count() const { return step_; }

  // Returns the pre-clip global gradient norm.
  double step(double lr) {
    double sq = 0.0;
    for (auto& [name, t] : params_.items()) {
      if (!t.has_grad()) continue;
      const T* g = t.grad_data();
      for (std::int64_t i = 0; i < t.size(); ++i)
        sq += double(g[i]) * double(g[i]);
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm))
      throw ContractError("non-finite gradient norm at optimizer step " +
                          std::to_string(step_));
    double gscale = 1.0;
    if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm)
      gscale = cfg_.clip_norm / norm;

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, step_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, step_);
    std::size_t off = 0;
    for (auto& [name, t] : params_.items()) {
      T* w = t.data();
      const T* g = t.has_grad() ? t.grad_data() : nullptr;
      for (std::int64_t i = 0; i < t.size(); ++i) {
        const double gi = g ? double(g[i]) * gscale : 0.0;
        double& m = m_[off + static_cast<std::size_t>(i)];
        double& v = v_[off + static_cast<std::size_t>(i)];
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gi;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        double wi = double(w[i]);
        wi -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                    cfg_.weight_decay * wi);
        if (!std::isfinite(wi))
          throw ContractError("non-finite weight '" + name +
                              "' at optimizer step " + std::to_string(step_));
        w[i] = static_cast<T>(wi);
      }
      off += static_cast<std::size_t>(t.size());
    }
    return norm;
  }

 private:
  ParamSet<T>& params_;
  AdamWConfig cfg_;
  std::vector<double> m_, v_;
  int step_ = 0;
};

// Linear warmup to max_lr followed by a cosine decay down to max_lr * 1e-4.
inline double one_cycle_lr(int step, int total_steps, int warmup_steps,
                           double max_lr) {
  if (total_steps <= 0 || warmup_steps < 0 || warmup_steps >= total_steps)
    throw ConfigError("one_cycle_lr: bad schedule bounds");
  if (step < 0 || step >= total_steps)
    throw ConfigError("one_cycle_lr: step " + std::to_string(step) +
                      " outside [0, " + std::to_string(total_steps) + ")");
  const double floor_lr = max_lr * 1e-4;
  if (step < warmup_steps)
    return max_lr * double(step + 1) / double(warmup_steps);
  if (total_steps - 1 == warmup_steps) return floor_lr;
  const double t =
      double(step - warmup_steps) / double(total_steps - 1 - warmup_steps);
  const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
  return floor_lr + (max_lr - floor_lr) * cosine;
}

}  // namespace pldlab
