#pragma once

#include <vector>

#include "pldlab/permutation.hpp"
#include "pldlab/pipeline.hpp"

namespace pldlab {

// Classes for the padded positions 1..T of a label (T = len + 1): the
// character classes followed by EOS in the final slot.
inline std::vector<int> padded_classes(const std::vector<int>& label,
                                       int eos_class) {
  std::vector<int> out = label;
  out.push_back(eos_class);
  return out;
}

// Decode work for one (label, plan) pair: query step t asks for position
// perm[t]; the context holds the classes of ALL positions (the plan mask
// hides the ones not yet "generated" under this order).
template <class T>
DecodeItem<T> plm_item(const std::vector<int>& label,
                       const PermutationPlan& plan, int vision_index,
                       int eos_class) {
  const int t = static_cast<int>(plan.perm.size());
  if (static_cast<int>(label.size()) + 1 != t)
    throw DataError("plan over " + std::to_string(t) +
                    " positions vs label of length " +
                    std::to_string(label.size()));
  DecodeItem<T> item;
  item.vision_index = vision_index;
  item.positions = plan.perm;
  item.context_chars = padded_classes(label, eos_class);
  item.context_positions.resize(static_cast<std::size_t>(t));
  for (int p = 0; p < t; ++p)
    item.context_positions[static_cast<std::size_t>(p)] = p + 1;
  item.mask = mask_tensor<T>(plan.mask, t, t + 1);
  return item;
}

// Targets in plan (query-step) order.
inline std::vector<int> plan_targets(const std::vector<int>& label,
                                     const PermutationPlan& plan,
                                     int eos_class) {
  const auto classes = padded_classes(label, eos_class);
  std::vector<int> out;
  out.reserve(plan.perm.size());
  for (int pos : plan.perm)
    out.push_back(classes[static_cast<std::size_t>(pos - 1)]);
  return out;
}

// Mean over plans of (mean over the T positions of the cross-entropy under
// that factorization order). `logits_rows` must contain the plan's T rows.
// Kept as a helper so the distillation loss can reuse the exact same CE
// formulation (its alpha = 0 case must reduce to this bitwise).
template <class T>
Tensor<T> plan_ce_scalar(const Tensor<T>& logits_rows,
                         const std::vector<int>& targets) {
  Tensor<T> ce = ops::cross_entropy_rows(logits_rows, targets);
  return ops::scale(ops::sum_all(ce), T(1) / T(targets.size()));
}

// PLM loss over a batch: one encoder pass feeds every (sample, plan) decode
// in a single decode_batch call. Per-sample loss is the order-invariant mean
// over its plans; the batch loss is the order-invariant mean over samples.
template <class T>
Tensor<T> plm_loss_batch(Model<T>& m,
                         const std::vector<const GlyphSample*>& images,
                         const std::vector<const std::vector<int>*>& labels,
                         const std::vector<std::vector<PermutationPlan>>& plans) {
  if (images.empty() || images.size() != labels.size() ||
      images.size() != plans.size())
    throw DataError("plm_loss_batch: images/labels/plans size mismatch");
  Tensor<T> vision = m.encoder().forward(images);
  const int tokens = m.encoder().num_tokens();
  const int eos = m.decoder().eos_class();

  std::vector<DecodeItem<T>> items;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i]->empty() ||
        static_cast<int>(labels[i]->size()) > m.decoder().max_label_len())
      throw DataError("label length " + std::to_string(labels[i]->size()) +
                      " outside [1, " +
                      std::to_string(m.decoder().max_label_len()) + "]");
    if (plans[i].empty()) throw DataError("sample without permutation plans");
    for (const auto& plan : plans[i])
      items.push_back(plm_item<T>(*labels[i], plan, static_cast<int>(i), eos));
  }
  Tensor<T> logits = m.decoder().decode_batch(vision, tokens, items);

  std::vector<Tensor<T>> sample_losses;
  sample_losses.reserve(images.size());
  int row = 0;
  std::size_t item_idx = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<Tensor<T>> plan_losses;
    plan_losses.reserve(plans[i].size());
    for (const auto& plan : plans[i]) {
      const int t = static_cast<int>(plan.perm.size());
      Tensor<T> rows = ops::slice_rows(logits, row, t);
      plan_losses.push_back(
          plan_ce_scalar(rows, plan_targets(*labels[i], plan, eos)));
      row += t;
      ++item_idx;
    }
    sample_losses.push_back(ops::mean_invariant(plan_losses));
  }
  (void)item_idx;
  return ops::mean_invariant(sample_losses);
}

template <class T>
Tensor<T> plm_loss(Model<T>& m, const GlyphSample& sample,
                   const std::vector<int>& label,
                   const std::vector<PermutationPlan>& plans) {
  return plm_loss_batch(m, {&sample}, {&label}, {plans});
}

}  // namespace pldlab
