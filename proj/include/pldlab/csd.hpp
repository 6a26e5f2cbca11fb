#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pldlab/inference.hpp"
#include "pldlab/plm.hpp"

namespace pldlab {

// What the teacher leaves behind for one training image: its refined greedy
// prediction and, for every character position of that pseudolabel, the
// full-context (cloze) logits. Logits are stored raw (temperature 1); the
// distillation temperature is applied at training time.
struct TeacherArtifact {
  std::uint32_t sample_index = 0;
  std::vector<int> pseudolabel;      // length L >= 1
  std::vector<float> cloze_logits;   // [L x classes] row-major
};

struct ArtifactStore {
  int classes = 0;
  std::vector<TeacherArtifact> items;  // ascending sample_index

  // nullptr when the teacher produced an empty prediction for this sample
  const TeacherArtifact* find(std::uint32_t sample_index) const;
};

struct ArtifactStats {
  int total = 0;
  int empty_skipped = 0;     // teacher predicted an empty string
  int refine_changed = 0;    // cloze round altered the greedy prediction
  int match_clean = 0;       // pseudolabel equals the hidden clean label
  int match_noisy = 0;       // pseudolabel equals the noisy annotation
};

// CSD1 container (little-endian). The reader re-derives the class count
// from the caller since the format stores only raw records.
void write_artifacts(const ArtifactStore& store, const std::string& path);
ArtifactStore read_artifacts(const std::string& path, int expected_classes);

struct CsdConfig {
  double alpha = 0.1;        // KD weight
  double tau = 2.0;          // distillation temperature
  bool tau2_rescale = true;  // multiply the KD term by tau^2
  bool loss_rescale = true;  // multiply the total by (1 + alpha0) / (1 + alpha)
  double alpha0 = 0.1;
};

// Runs the teacher over the whole dataset: greedy + one cloze round gives
// the pseudolabel; the stored logits are the cloze logits conditioned on
// that final pseudolabel. Samples with an empty prediction are skipped.
template <class T>
ArtifactStore generate_artifacts(Model<T>& m, const Dataset& ds,
                                 ArtifactStats* stats = nullptr,
                                 int chunk = 32) {
  ArtifactStore store;
  store.classes = m.decoder().classes();
  ArtifactStats local;
  local.total = static_cast<int>(ds.samples.size());
  for (std::size_t base = 0; base < ds.samples.size();
       base += static_cast<std::size_t>(chunk)) {
    const std::size_t hi =
        std::min(ds.samples.size(), base + static_cast<std::size_t>(chunk));
    std::vector<const GlyphSample*> images;
    for (std::size_t i = base; i < hi; ++i) images.push_back(&ds.samples[i]);

    auto greedy = greedy_decode_batch(m, images);
    auto refined = cloze_refine_batch(m, images, greedy);

    // second cloze pass for predictions the refinement changed: stored
    // logits must condition on the final pseudolabel
    std::vector<const GlyphSample*> redo_images;
    std::vector<const std::vector<int>*> redo_labels;
    std::vector<std::size_t> redo_slot;
    for (std::size_t k = 0; k < refined.size(); ++k) {
      if (refined[k].chars != greedy[k].chars) {
        ++local.refine_changed;
        redo_images.push_back(images[k]);
        redo_labels.push_back(&refined[k].chars);
        redo_slot.push_back(k);
      }
    }
    auto redo_rows = cloze_logits_batch(m, redo_images, redo_labels);

    const int classes = store.classes;
    for (std::size_t k = 0; k < refined.size(); ++k) {
      const auto& pred = refined[k];
      const std::size_t sample_index = base + k;
      if (pred.chars.empty()) {
        ++local.empty_skipped;
        continue;
      }
      TeacherArtifact art;
      art.sample_index = static_cast<std::uint32_t>(sample_index);
      art.pseudolabel = pred.chars;
      const std::size_t L = pred.chars.size();
      art.cloze_logits.resize(L * static_cast<std::size_t>(classes));
      auto redo_it = std::find(redo_slot.begin(), redo_slot.end(), k);
      if (redo_it != redo_slot.end()) {
        const auto& rows = redo_rows[static_cast<std::size_t>(
            redo_it - redo_slot.begin())];
        std::copy(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(
                                                   L * classes),
                  art.cloze_logits.begin());
      } else {
        for (std::size_t t = 0; t < L; ++t)
          std::copy(pred.position_logits[t].begin(),
                    pred.position_logits[t].end(),
                    art.cloze_logits.begin() +
                        static_cast<std::ptrdiff_t>(t * classes));
      }
      if (art.pseudolabel == ds.samples[sample_index].clean)
        ++local.match_clean;
      if (art.pseudolabel == ds.samples[sample_index].noisy)
        ++local.match_noisy;
      store.items.push_back(std::move(art));
    }
  }
  if (stats) *stats = local;
  return store;
}

// Teacher probabilities at temperature tau for every stored position.
inline std::vector<double> artifact_soft_targets(const TeacherArtifact& art,
                                                 int classes, double tau) {
  const std::size_t rows = art.pseudolabel.size();
  std::vector<double> probs(rows * static_cast<std::size_t>(classes));
  for (std::size_t t = 0; t < rows; ++t) {
    const float* row = art.cloze_logits.data() + t * classes;
    double mx = row[0] / tau;
    for (int j = 1; j < classes; ++j) mx = std::max(mx, double(row[j]) / tau);
    double sum = 0;
    for (int j = 0; j < classes; ++j) {
      const double e = std::exp(double(row[j]) / tau - mx);
      probs[t * classes + j] = e;
      sum += e;
    }
    for (int j = 0; j < classes; ++j) probs[t * classes + j] /= sum;
  }
  return probs;
}

// Distillation loss for one batch. Per plan:
//   ( sum_t CE(position perm[t]) + alpha * sum_{char positions} KD ) / T
// where KD at a position is KL(teacher_tau || student_tau), optionally
// scaled by tau^2; EOS slots carry no KD term (teachers store none). The CE
// path is built with the exact ops of the PLM loss, so alpha = 0 (with
// loss_rescale off) reproduces plm_loss_batch bit-for-bit on pseudolabels.
template <class T>
Tensor<T> csd_loss_batch(Model<T>& m,
                         const std::vector<const GlyphSample*>& images,
                         const std::vector<const TeacherArtifact*>& arts,
                         const std::vector<std::vector<PermutationPlan>>& plans,
                         const CsdConfig& cfg) {
  if (images.empty() || images.size() != arts.size() ||
      images.size() != plans.size())
    throw DataError("csd_loss_batch: images/artifacts/plans size mismatch");
  const int classes = m.decoder().classes();
  const int eos = m.decoder().eos_class();
  Tensor<T> vision = m.encoder().forward(images);
  const int tokens = m.encoder().num_tokens();

  std::vector<DecodeItem<T>> items;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!arts[i] || arts[i]->pseudolabel.empty())
      throw DataError("csd_loss_batch: sample without a pseudolabel");
    for (const auto& plan : plans[i])
      items.push_back(plm_item<T>(arts[i]->pseudolabel, plan,
                                  static_cast<int>(i), eos));
  }
  Tensor<T> logits = m.decoder().decode_batch(vision, tokens, items);

  std::vector<Tensor<T>> sample_losses;
  sample_losses.reserve(images.size());
  int row = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& art = *arts[i];
    const int L = static_cast<int>(art.pseudolabel.size());
    const int t_len = L + 1;
    std::vector<double> soft;
    if (cfg.alpha != 0.0)
      soft = artifact_soft_targets(art, classes, cfg.tau);
    std::vector<Tensor<T>> plan_losses;
    plan_losses.reserve(plans[i].size());
    for (const auto& plan : plans[i]) {
      Tensor<T> rows = ops::slice_rows(logits, row, t_len);
      row += t_len;
      Tensor<T> loss =
          plan_ce_scalar(rows, plan_targets(art.pseudolabel, plan, eos));
      if (cfg.alpha != 0.0) {
        // student rows for positions 1..L, regardless of plan order
        std::vector<int> row_of_pos(static_cast<std::size_t>(t_len));
        for (int r2 = 0; r2 < t_len; ++r2)
          row_of_pos[static_cast<std::size_t>(plan.perm[r2] - 1)] = r2;
        std::vector<int> char_rows(row_of_pos.begin(),
                                   row_of_pos.begin() + L);
        Tensor<T> student = ops::gather_rows(rows, char_rows);
        Tensor<T> log_q = ops::log_softmax_rows(
            ops::scale(student, T(1.0 / cfg.tau)));
        std::vector<T> teacher(soft.begin(), soft.end());
        Tensor<T> kd = ops::sum_all(ops::kd_rows(teacher, log_q));
        double w = cfg.alpha / t_len;
        if (cfg.tau2_rescale) w *= cfg.tau * cfg.tau;
        loss = ops::add(loss, ops::scale(kd, static_cast<T>(w)));
      }
      plan_losses.push_back(loss);
    }
    sample_losses.push_back(ops::mean_invariant(plan_losses));
  }
  Tensor<T> total = ops::mean_invariant(sample_losses);
  if (cfg.loss_rescale)
    total = ops::scale(total,
                       static_cast<T>((1.0 + cfg.alpha0) / (1.0 + cfg.alpha)));
  return total;
}

template <class T>
Tensor<T> csd_loss(Model<T>& m, const GlyphSample& s, const TeacherArtifact& a,
                   const std::vector<PermutationPlan>& plans,
                   const CsdConfig& cfg) {
  return csd_loss_batch(m, {&s}, {&a}, {plans}, cfg);
}

}  // namespace pldlab
