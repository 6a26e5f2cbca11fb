#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pldlab/counters.hpp"
#include "pldlab/rng.hpp"
#include "pldlab/tensor.hpp"

namespace pldlab {

// Named trainable tensors. Built from ParamSpec lists; initialization draws
// from a substream keyed by the parameter NAME, so adding or reordering
// parameters elsewhere never shifts another tensor's initial values.
template <class T>
class ParamSet {
 public:
  void build(const std::vector<ParamSpec>& specs, const Rng& init_rng) {
    for (const auto& spec : specs) {
      if (index_.count(spec.name))
        throw ConfigError("duplicate parameter name '" + spec.name + "'");
      Tensor<T> t = Tensor<T>::zeros(spec.shape, /*requires_grad=*/true);
      Rng rng = init_rng.substream("init", fnv1a64(spec.name));
      init_values(t, spec.init, rng);
      index_[spec.name] = items_.size();
      items_.emplace_back(spec.name, std::move(t));
    }
  }

  Tensor<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
      throw ConfigError("unknown parameter '" + name + "'");
    return items_[it->second].second;
  }
  const Tensor<T>& get(const std::string& name) const {
    return const_cast<ParamSet*>(this)->get(name);
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& items() const {
    return items_;
  }

  std::int64_t total_params() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

 private:
  static void init_values(Tensor<T>& t, InitKind kind, Rng& rng) {
    switch (kind) {
      case InitKind::kZero:
        break;
      case InitKind::kOne:
        for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = T(1);
        break;
      case InitKind::kTruncNormal:
        for (std::int64_t i = 0; i < t.size(); ++i) {
          double z;
          do {
            z = rng.gaussian();
          } while (std::abs(z) > 2.0);
          t.data()[i] = static_cast<T>(0.02 * z);
        }
        break;
      case InitKind::kLambdaNoise:
        for (std::int64_t i = 0; i < t.size(); ++i)
          t.data()[i] = static_cast<T>(0.1 * rng.gaussian());
        break;
    }
  }

  std::vector<std::pair<std::string, Tensor<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace pldlab
