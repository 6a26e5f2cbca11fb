#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "pldlab/csd.hpp"
#include "pldlab/optim.hpp"
#include "pldlab/plm.hpp"

namespace pldlab {

enum class LabelSource { kClean, kNoisy };

// Defaults are sized for the desk-scale protocol (small batches, a few
// thousand steps on one core). The full-scale recipe this mirrors uses
// batch 1024, 110k steps, 3.3k warmup and peak lr 0.01; peak lr here is
// scaled roughly with sqrt(batch/1024).
struct TrainConfig {
  int batch_size = 64;
  int steps = 5000;
  int warmup_steps = 300;
  double max_lr = 2.5e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double clip_norm = 1.0;
  int k_random_perms = 4;  // plans per sample = identity + reverse + these
  std::uint64_t seed = 0;
  int log_every = 100;

  void validate() const {
    if (batch_size <= 0 || steps <= 0)
      throw ConfigError("batch_size and steps must be positive");
    if (warmup_steps < 0 || warmup_steps >= steps)
      throw ConfigError("warmup_steps must lie in [0, steps)");
    if (k_random_perms < 0) throw ConfigError("k_random_perms must be >= 0");
    if (log_every <= 0) throw ConfigError("log_every must be positive");
  }
};

struct TrainStats {
  std::vector<double> losses;  // one entry per optimizer step
  int skipped_samples = 0;     // draws without a usable pseudolabel

  // mean over the last (up to) 100 steps
  double final_loss() const {
    if (losses.empty()) return 0.0;
    const std::size_t n = std::min<std::size_t>(100, losses.size());
    double s = std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(n),
                               losses.end(), 0.0);
    return s / double(n);
  }
};

using ProgressFn = std::function<void(int step, double loss, double lr)>;

namespace detail {

template <class T>
struct TrainLoop {
  Model<T>& m;
  const TrainConfig& cfg;
  AdamW<T> opt;
  Rng run_rng;
  TrainStats stats;

  TrainLoop(Model<T>& model, const TrainConfig& c)
      : m(model),
        cfg(c),
        opt(model.params(), AdamWConfig{c.beta1, c.beta2, 1e-8,
                                        c.weight_decay, c.clip_norm}),
        run_rng(c.seed) {
    cfg.validate();
  }

  // draws the step's sample indices; `usable` can reject a draw (the reject
  // is counted and the stream simply advances, so the schedule stays
  // reproducible no matter which samples carry artifacts)
  std::vector<int> draw_batch(int step, std::size_t n,
                              const std::function<bool(int)>& usable) {
    Rng rng = run_rng.substream("batches", static_cast<std::uint64_t>(step));
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(cfg.batch_size));
    std::int64_t attempts = 0;
    const std::int64_t cap =
        std::int64_t(cfg.batch_size) * 1000 + 1000;
    while (static_cast<int>(idx.size()) < cfg.batch_size) {
      if (++attempts > cap)
        throw DataError("no usable samples while drawing a batch");
      const int i = rng.uniform_int(0, static_cast<int>(n) - 1);
      if (usable && !usable(i)) {
        ++stats.skipped_samples;
        continue;
      }
      idx.push_back(i);
    }
    return idx;
  }

  std::vector<std::vector<PermutationPlan>> draw_plans(
      int step, const std::vector<int>& lens) {
    Rng rng = run_rng.substream("perms", static_cast<std::uint64_t>(step));
    std::vector<std::vector<PermutationPlan>> plans;
    plans.reserve(lens.size());
    for (int len : lens)
      plans.push_back(sample_permutations(len + 1, cfg.k_random_perms, rng));
    return plans;
  }

  template <class LossFn>
  void run(LossFn&& loss_of_step, const ProgressFn& progress) {
    for (int step = 0; step < cfg.steps; ++step) {
      m.params().zero_grads();
      double loss_val;
      {
        Graph<T> graph;
        GraphScope<T> scope(graph);
        Tensor<T> loss = loss_of_step(step);
        graph.backward(loss);
        loss_val = double(loss.item());
      }
      const double lr =
          one_cycle_lr(step, cfg.steps, cfg.warmup_steps, cfg.max_lr);
      opt.step(lr);
      stats.losses.push_back(loss_val);
      if (progress &&
          (step % cfg.log_every == 0 || step + 1 == cfg.steps))
        progress(step, loss_val, lr);
    }
  }
};

}  // namespace detail

// Permutation-LM training on ground-truth (clean or noisy) annotations.
template <class T>
TrainStats train_supervised(Model<T>& m, const Dataset& ds,
                            const TrainConfig& cfg, LabelSource source,
                            const ProgressFn& progress = nullptr) {
  if (ds.samples.empty()) throw DataError("empty dataset");
  detail::TrainLoop<T> loop(m, cfg);
  loop.run(
      [&](int step) {
        const auto idx = loop.draw_batch(step, ds.samples.size(), nullptr);
        std::vector<const GlyphSample*> images;
        std::vector<const std::vector<int>*> labels;
        std::vector<int> lens;
        for (int i : idx) {
          const auto& s = ds.samples[static_cast<std::size_t>(i)];
          images.push_back(&s);
          const auto& lab = source == LabelSource::kClean ? s.clean : s.noisy;
          labels.push_back(&lab);
          lens.push_back(static_cast<int>(lab.size()));
        }
        const auto plans = loop.draw_plans(step, lens);
        return plm_loss_batch(m, images, labels, plans);
      },
      progress);
  return loop.stats;
}

// Distillation training against the teacher's artifact store. Draws that
// land on samples the teacher skipped are resampled from the same stream.
template <class T>
TrainStats train_csd(Model<T>& m, const Dataset& ds,
                     const ArtifactStore& store, const TrainConfig& cfg,
                     const CsdConfig& csd,
                     const ProgressFn& progress = nullptr) {
  if (ds.samples.empty()) throw DataError("empty dataset");
  if (store.classes != m.decoder().classes())
    throw DataError("artifact class count " + std::to_string(store.classes) +
                    " does not match the model (" +
                    std::to_string(m.decoder().classes()) + ")");
  detail::TrainLoop<T> loop(m, cfg);
  loop.run(
      [&](int step) {
        const auto idx = loop.draw_batch(
            step, ds.samples.size(), [&](int i) {
              return store.find(static_cast<std::uint32_t>(i)) != nullptr;
            });
        std::vector<const GlyphSample*> images;
        std::vector<const TeacherArtifact*> arts;
        std::vector<int> lens;
        for (int i : idx) {
          images.push_back(&ds.samples[static_cast<std::size_t>(i)]);
          const auto* art = store.find(static_cast<std::uint32_t>(i));
          arts.push_back(art);
          lens.push_back(static_cast<int>(art->pseudolabel.size()));
        }
        const auto plans = loop.draw_plans(step, lens);
        return csd_loss_batch(m, images, arts, plans, csd);
      },
      progress);
  return loop.stats;
}

}  // namespace pldlab
