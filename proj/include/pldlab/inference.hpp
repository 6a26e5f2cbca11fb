#pragma once

#include <algorithm>
#include <vector>

#include "pldlab/permutation.hpp"
#include "pldlab/pipeline.hpp"

namespace pldlab {

struct Prediction {
  std::vector<int> chars;  // charset indices; EOS itself is not stored
  // raw logits for each predicted character's position (classes-wide);
  // refinement replaces these with the cloze-pass logits
  std::vector<std::vector<float>> position_logits;
  bool refined = false;
};

namespace detail {

// argmax with ties resolved to the lowest index
template <class T>
int argmax_row(const T* row, int n) {
  int best = 0;
  for (int j = 1; j < n; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

}  // namespace detail

// Greedy left-to-right decoding: at step p the model predicts position p
// given BOS plus the p-1 characters already emitted; stops at EOS or after
// kMaxLabelLen characters. Run without an active Graph this records nothing.
template <class T>
std::vector<Prediction> greedy_decode_batch(
    Model<T>& m, const std::vector<const GlyphSample*>& images) {
  std::vector<Prediction> preds(images.size());
  if (images.empty()) return preds;
  Tensor<T> vision = m.encoder().forward(images);
  const int tokens = m.encoder().num_tokens();
  const int classes = m.decoder().classes();
  const int eos = m.decoder().eos_class();

  std::vector<int> active(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    active[i] = static_cast<int>(i);

  for (int p = 1; p <= kMaxLabelLen && !active.empty(); ++p) {
    std::vector<DecodeItem<T>> items;
    items.reserve(active.size());
    for (int idx : active) {
      DecodeItem<T> it;
      it.vision_index = idx;
      it.positions = {p};
      it.context_chars = preds[static_cast<std::size_t>(idx)].chars;
      for (int q = 1; q < p; ++q) it.context_positions.push_back(q);
      it.mask = Tensor<T>::zeros({1, p});  // everything visible
      items.push_back(std::move(it));
    }
    Tensor<T> logits = m.decoder().decode_batch(vision, tokens, items);
    std::vector<int> still_active;
    for (std::size_t r = 0; r < active.size(); ++r) {
      const T* row = logits.data() + static_cast<std::int64_t>(r) * classes;
      const int cls = detail::argmax_row(row, classes);
      if (cls == eos) continue;  // finished
      auto& pred = preds[static_cast<std::size_t>(active[r])];
      pred.chars.push_back(cls);
      pred.position_logits.emplace_back(row, row + classes);
      still_active.push_back(active[r]);
    }
    active = std::move(still_active);
  }
  return preds;
}

// Cloze logits for explicit labels: for sample i returns the [T x classes]
// rows (position order, T = len + 1) where row t is predicted from BOS, the
// image, and every position except t. Shared by refinement and by teacher
// soft-label extraction.
template <class T>
std::vector<std::vector<T>> cloze_logits_batch(
    Model<T>& m, const std::vector<const GlyphSample*>& images,
    const std::vector<const std::vector<int>*>& labels) {
  if (images.size() != labels.size())
    throw DataError("cloze_logits_batch: images/labels size mismatch");
  std::vector<std::vector<T>> out(images.size());
  std::vector<const GlyphSample*> todo_images;
  std::vector<std::size_t> todo_index;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i]->empty()) continue;  // nothing to cloze
    todo_images.push_back(images[i]);
    todo_index.push_back(i);
  }
  if (todo_images.empty()) return out;

  Tensor<T> vision = m.encoder().forward(todo_images);
  const int tokens = m.encoder().num_tokens();
  const int classes = m.decoder().classes();
  const int eos = m.decoder().eos_class();

  std::vector<DecodeItem<T>> items;
  items.reserve(todo_index.size());
  for (std::size_t k = 0; k < todo_index.size(); ++k) {
    const auto& label = *labels[todo_index[k]];
    const int t = static_cast<int>(label.size()) + 1;
    DecodeItem<T> it;
    it.vision_index = static_cast<int>(k);
    it.positions.resize(static_cast<std::size_t>(t));
    it.context_positions.resize(static_cast<std::size_t>(t));
    for (int p = 0; p < t; ++p) {
      it.positions[static_cast<std::size_t>(p)] = p + 1;
      it.context_positions[static_cast<std::size_t>(p)] = p + 1;
    }
    it.context_chars = label;
    it.context_chars.push_back(eos);
    it.mask = mask_tensor<T>(cloze_mask(t), t, t + 1);
    items.push_back(std::move(it));
  }
  Tensor<T> logits = m.decoder().decode_batch(vision, tokens, items);
  int row = 0;
  for (std::size_t k = 0; k < todo_index.size(); ++k) {
    const int t = static_cast<int>(labels[todo_index[k]]->size()) + 1;
    const T* base = logits.data() + static_cast<std::int64_t>(row) * classes;
    out[todo_index[k]].assign(base, base + std::int64_t(t) * classes);
    row += t;
  }
  return out;
}

// One simultaneous cloze round over a greedy prediction: every character
// position is re-predicted given all the others (and EOS in its slot). The
// length is frozen, so re-prediction picks the best CHARACTER class; the
// structural EOS row is not revisited. Empty predictions pass through.
template <class T>
std::vector<Prediction> cloze_refine_batch(
    Model<T>& m, const std::vector<const GlyphSample*>& images,
    std::vector<Prediction> preds) {
  if (images.size() != preds.size())
    throw DataError("cloze_refine_batch: images/preds size mismatch");
  std::vector<const std::vector<int>*> labels;
  labels.reserve(preds.size());
  for (const auto& p : preds) labels.push_back(&p.chars);
  auto rows = cloze_logits_batch(m, images, labels);
  const int classes = m.decoder().classes();
  const int nchars = m.vocab().charset_size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto& pred = preds[i];
    if (pred.chars.empty()) continue;
    for (std::size_t t = 0; t < pred.chars.size(); ++t) {
      const T* row = rows[i].data() + static_cast<std::int64_t>(t) * classes;
      pred.chars[t] = detail::argmax_row(row, nchars);  // chars only
      pred.position_logits[t].assign(row, row + classes);
    }
    pred.refined = true;
  }
  return preds;
}

template <class T>
std::vector<Prediction> predict_batch(Model<T>& m,
                                      const std::vector<const GlyphSample*>& images,
                                      bool refine) {
  auto preds = greedy_decode_batch(m, images);
  if (refine) preds = cloze_refine_batch(m, images, std::move(preds));
  return preds;
}

template <class T>
Prediction greedy_decode(Model<T>& m, const GlyphSample& s) {
  return greedy_decode_batch(m, {&s})[0];
}

template <class T>
Prediction cloze_refine(Model<T>& m, const GlyphSample& s, Prediction pred) {
  return cloze_refine_batch(m, {&s}, {std::move(pred)})[0];
}

}  // namespace pldlab
