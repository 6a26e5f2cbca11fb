#pragma once

#include <string>
#include <vector>

#include "pldlab/inference.hpp"

namespace pldlab {

// Case/punctuation-insensitive word accuracy (exact match after folding);
// fold=false compares raw strings.
double word_accuracy(const std::vector<std::string>& preds,
                     const std::vector<std::string>& refs, bool fold = true);

struct EvalResult {
  int n = 0;
  int n_corrupted = 0;
  double acc_clean = 0.0;             // whole set vs hidden clean labels
  double acc_corrupted_subset = 0.0;  // corrupted samples vs clean labels
};

// One CSV line per finished run; the column set is fixed.
struct ReportRow {
  std::string run_id;
  std::string encoder;
  std::string decoder;
  bool differential = false;
  std::int64_t params = 0;
  double gflops_at_5p5 = 0.0;  // decode cost at the 5.5-char reference length
  double noise_rate = 0.0;
  std::string method;  // "sup-clean" | "sup-noisy" | "pseudo" | "csd" | ...
  double alpha = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
  double train_loss_final = 0.0;
  double word_acc_clean = 0.0;
  double word_acc_corruptedsubset = 0.0;
};

void write_report_csv(const std::string& path,
                      const std::vector<ReportRow>& rows);
// appends to an existing report (or starts one with the header)
void append_report_row(const std::string& path, const ReportRow& row);

template <class T>
EvalResult evaluate(Model<T>& m, const Dataset& ds, bool refine,
                    int chunk = 32) {
  if (ds.samples.empty()) throw DataError("empty dataset");
  EvalResult res;
  res.n = static_cast<int>(ds.samples.size());
  int ok_all = 0, ok_cor = 0;
  for (std::size_t base = 0; base < ds.samples.size();
       base += static_cast<std::size_t>(chunk)) {
    const std::size_t hi =
        std::min(ds.samples.size(), base + static_cast<std::size_t>(chunk));
    std::vector<const GlyphSample*> images;
    for (std::size_t i = base; i < hi; ++i) images.push_back(&ds.samples[i]);
    auto preds = predict_batch(m, images, refine);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      const auto& s = ds.samples[base + k];
      const bool hit = Vocab::fold(m.vocab().decode(preds[k].chars)) ==
                       Vocab::fold(ds.vocab.decode(s.clean));
      if (hit) ++ok_all;
      if (s.corrupted) {
        ++res.n_corrupted;
        if (hit) ++ok_cor;
      }
    }
  }
  res.acc_clean = double(ok_all) / double(res.n);
  res.acc_corrupted_subset =
      res.n_corrupted ? double(ok_cor) / double(res.n_corrupted) : 0.0;
  return res;
}

}  // namespace pldlab
