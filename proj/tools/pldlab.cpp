// Command-line front end: dataset synthesis, training, distillation,
// prediction, evaluation and the parameter/FLOPs tables.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pldlab/checkpoint.hpp"
#include "pldlab/csd.hpp"
#include "pldlab/eval.hpp"
#include "pldlab/kernels.hpp"
#include "pldlab/manifest.hpp"
#include "pldlab/trainer.hpp"

using nlohmann::json;
using namespace pldlab;

namespace {

Vocab make_vocab(const std::string& name) {
  if (name == "toy40") return Vocab::toy40();
  if (name == "ascii94") return Vocab::ascii94();
  return Vocab::from_chars(name);  // literal character list
}

std::string stem_of(const std::string& path) {
  std::size_t slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

void progress_printer(int step, double loss, double lr) {
  std::printf("step %6d  loss %.4f  lr %.6g\n", step, loss, lr);
  std::fflush(stdout);
}

const std::string g_run_started = utc_now_string();

void emit_manifest(const std::string& out_path, const std::string& command,
                   const std::vector<std::string>& args, std::uint64_t seed,
                   const std::string& data_path) {
  RunManifest m;
  m.run_id = stem_of(out_path);
  m.command = command;
  m.args = args;
  m.seed = seed;
  m.dataset_path = data_path;
  m.dataset_hash = data_path.empty() ? 0 : file_fnv1a(data_path);
  m.started_utc = g_run_started;
  m.finished_utc = utc_now_string();
  write_manifest(m, out_path + ".manifest.json");
}

struct TrainOpts {
  TrainConfig cfg;
  std::string encoder = "uvit-s";
  std::string decoder = "upld-b";

  void add_to(CLI::App* sub, bool with_arch = true) {
    sub->add_option("--steps", cfg.steps, "optimizer steps");
    sub->add_option("--batch", cfg.batch_size, "samples per step");
    sub->add_option("--warmup", cfg.warmup_steps, "linear warmup steps");
    sub->add_option("--lr", cfg.max_lr, "peak learning rate");
    sub->add_option("--wd", cfg.weight_decay, "decoupled weight decay");
    sub->add_option("--clip", cfg.clip_norm, "global gradient-norm clip");
    sub->add_option("--kperms", cfg.k_random_perms,
                    "random permutations per sample (plus identity+reverse)");
    sub->add_option("--seed", cfg.seed, "run seed (init + batches + perms)");
    sub->add_option("--log-every", cfg.log_every, "progress print interval");
    if (with_arch) {
      sub->add_option("--encoder", encoder, "encoder preset");
      sub->add_option("--decoder", decoder, "decoder preset");
    }
  }
};

json predict_line(const Vocab& v, int image_id, const Prediction& raw,
                  const Prediction& refined) {
  return json{{"image_id", image_id},
              {"raw", v.decode(raw.chars)},
              {"refined", v.decode(refined.chars)},
              {"folded", Vocab::fold(v.decode(refined.chars))}};
}

void require_same_vocab(const Model<float>& m, const Dataset& ds) {
  if (m.vocab().chars() != ds.vocab.chars())
    throw ConfigError("checkpoint charset '" + m.vocab().chars() +
                      "' does not match dataset charset '" + ds.vocab.chars() +
                      "'");
}

CheckpointMeta meta_for(const Model<float>& m, const EncoderConfig& ec,
                        const DecoderConfig& dc, std::uint64_t seed, int step,
                        const json& extra) {
  CheckpointMeta meta;
  meta.encoder = ec;
  meta.decoder = dc;
  meta.vocab_chars = m.vocab().chars();
  meta.max_label_len = kMaxLabelLen;
  meta.init_seed = seed;
  meta.step = step;
  meta.extra = extra.dump();
  return meta;
}

double pair_gflops(const EncoderConfig& ec, const DecoderConfig& dc,
                   int charset, double label_len) {
  return (encoder_flops(ec) +
          decoder_flops(dc, charset, label_len, ec.num_patches())) /
         1e9;
}

void run_count_table() {
  const double kRefLen = 5.5;
  std::printf("%-10s %-10s %12s %10s\n", "encoder", "decoder", "params",
              "gflops@5.5");
  for (const char* name : {"vit-t", "vit-s", "vit-b"}) {
    EncoderConfig ec = encoder_preset(name);
    std::printf("%-10s %-10s %12lld %10.2f\n", name, "-",
                static_cast<long long>(count_params(encoder_param_specs(ec))),
                encoder_flops(ec) / 1e9);
  }
  for (const char* name : {"pld-t", "pld-s", "pld-b", "pld-l", "pld-diff"}) {
    EncoderConfig ec = encoder_preset("vit-b");
    DecoderConfig dc = decoder_preset(name);
    const auto specs = decoder_param_specs(dc, 94, kMaxLabelLen);
    std::printf("%-10s %-10s %12lld %10.2f\n", "-", name,
                static_cast<long long>(count_params(specs)),
                decoder_flops(dc, 94, kRefLen, ec.num_patches()) / 1e9);
  }
  std::printf("desk-scale presets (32x64 glyphs, 40-char set):\n");
  for (const char* name : {"uvit-t", "uvit-s", "uvit-b"}) {
    EncoderConfig ec = encoder_preset(name);
    std::printf("%-10s %-10s %12lld %10.4f\n", name, "-",
                static_cast<long long>(count_params(encoder_param_specs(ec))),
                encoder_flops(ec) / 1e9);
  }
  for (const char* name :
       {"upld-t", "upld-s", "upld-b", "upld-l", "upld-diff"}) {
    EncoderConfig ec = encoder_preset("uvit-s");
    DecoderConfig dc = decoder_preset(name);
    const auto specs = decoder_param_specs(dc, 40, kMaxLabelLen);
    std::printf("%-10s %-10s %12lld %10.4f\n", "-", name,
                static_cast<long long>(count_params(specs)),
                decoder_flops(dc, 40, kRefLen, ec.num_patches()) / 1e9);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glyph recognition lab: permutation LM training, cloze "
               "refinement and self-distillation on synthetic text images"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "kernel threads (0 = PLDLAB_THREADS or hardware)");
  bool deterministic = false;
  app.add_flag("--deterministic", deterministic,
               "assert bit-reproducible execution (always on: kernels are "
               "bit-identical at any thread count; accepted so scripts can "
               "state the contract explicitly)");
  // subcommand callbacks fire inside parse(), so thread setup has to happen
  // at the top of each one rather than after parsing
  auto apply_threads = [&threads] {
    if (threads > 0) kernels::set_num_threads(threads);
  };

  std::vector<std::string> raw_args(argv + 1, argv + argc);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "render a glyph dataset");
  struct {
    std::string out, charset = "toy40";
    int count = 2000, height = 32, width = 64, lexicon = 512;
    double noise = 0.2;
    std::uint64_t seed = 1;
  } so;
  synth->add_option("--out", so.out, "output GLY1 path")->required();
  synth->add_option("--count", so.count, "number of samples");
  synth->add_option("--seed", so.seed, "style/text seed");
  synth->add_option("--charset", so.charset, "toy40|ascii94|literal chars");
  synth->add_option("--noise", so.noise,
                    "target fraction of corrupted labels [0,1)");
  synth->add_option("--height", so.height, "image height");
  synth->add_option("--width", so.width, "image width");
  synth->add_option("--lexicon", so.lexicon, "lexicon size");
  synth->callback([&] {
    apply_threads();
    Vocab vocab = make_vocab(so.charset);
    NoiseSpec noise = scaled_noise(so.noise, so.seed + 0x9E3779B9u);
    Dataset ds = make_synth_dataset(vocab, so.count, so.seed, noise, so.height,
                                    so.width, so.lexicon);
    write_dataset(ds, so.out);
    int corrupted = 0;
    for (const auto& s : ds.samples) corrupted += s.corrupted ? 1 : 0;
    emit_manifest(so.out, "synth", raw_args, so.seed, so.out);
    std::printf("wrote %zu samples (%d corrupted, %.1f%%) to %s\n",
                ds.samples.size(), corrupted,
                100.0 * corrupted / ds.samples.size(), so.out.c_str());
  });

  // ---- train ----
  auto* train = app.add_subcommand("train", "supervised permutation-LM run");
  struct {
    std::string data, out, labels = "noisy";
  } to;
  TrainOpts topt;
  train->add_option("--data", to.data, "GLY1 dataset")->required();
  train->add_option("--out", to.out, "output checkpoint")->required();
  train->add_option("--labels", to.labels, "clean|noisy annotations");
  topt.add_to(train);
  train->callback([&] {
    apply_threads();
    if (to.labels != "clean" && to.labels != "noisy")
      throw ConfigError("--labels must be clean or noisy");
    Dataset ds = read_dataset(to.data);
    EncoderConfig ec = encoder_preset(topt.encoder);
    DecoderConfig dc = decoder_preset(topt.decoder);
    Model<float> m(ec, dc, ds.vocab, topt.cfg.seed);
    std::printf("model %s + %s: %lld params\n", ec.name.c_str(),
                dc.name.c_str(), static_cast<long long>(m.total_params()));
    const auto src = to.labels == "clean" ? LabelSource::kClean
                                          : LabelSource::kNoisy;
    TrainStats stats =
        train_supervised(m, ds, topt.cfg, src, progress_printer);
    json extra{{"method", "sup-" + to.labels},
               {"final_loss", stats.final_loss()}};
    save_checkpoint(to.out, m,
                    meta_for(m, ec, dc, topt.cfg.seed, topt.cfg.steps, extra));
    emit_manifest(to.out, "train", raw_args, topt.cfg.seed, to.data);
    std::printf("final loss %.4f -> %s\n", stats.final_loss(),
                to.out.c_str());
  });

  // ---- pseudolabel ----
  auto* pseudo = app.add_subcommand(
      "pseudolabel", "teacher pass: greedy + cloze pseudolabels and logits");
  struct {
    std::string data, ckpt, out;
    int chunk = 32;
  } po;
  pseudo->add_option("--data", po.data, "GLY1 dataset")->required();
  pseudo->add_option("--ckpt", po.ckpt, "teacher checkpoint")->required();
  pseudo->add_option("--out", po.out, "output CSD1 path")->required();
  pseudo->add_option("--chunk", po.chunk, "images per forward pass");
  pseudo->callback([&] {
    apply_threads();
    Dataset ds = read_dataset(po.data);
    LoadedCheckpoint lc = load_checkpoint(po.ckpt);
    require_same_vocab(*lc.model, ds);
    ArtifactStats stats;
    ArtifactStore store = generate_artifacts(*lc.model, ds, &stats, po.chunk);
    write_artifacts(store, po.out);
    emit_manifest(po.out, "pseudolabel", raw_args, lc.meta.init_seed, po.data);
    std::printf("pseudolabels: %d total, %d skipped (empty), %d refined, "
                "%d match clean, %d match noisy -> %s\n",
                stats.total, stats.empty_skipped, stats.refine_changed,
                stats.match_clean, stats.match_noisy, po.out.c_str());
  });

  // ---- distill ----
  auto* distill =
      app.add_subcommand("distill", "train a student against teacher logits");
  struct {
    std::string data, artifacts, out;
    CsdConfig csd;
    bool no_tau2 = false, no_rescale = false;
  } co;
  TrainOpts copt;
  distill->add_option("--data", co.data, "GLY1 dataset")->required();
  distill->add_option("--artifacts", co.artifacts, "CSD1 store")->required();
  distill->add_option("--out", co.out, "output checkpoint")->required();
  distill->add_option("--alpha", co.csd.alpha, "KD weight");
  distill->add_option("--tau", co.csd.tau, "distillation temperature");
  distill->add_option("--alpha0", co.csd.alpha0, "loss-rescale reference");
  distill->add_flag("--no-tau2-rescale", co.no_tau2, "drop the tau^2 factor");
  distill->add_flag("--no-loss-rescale", co.no_rescale,
                    "drop the (1+alpha0)/(1+alpha) factor");
  copt.add_to(distill);
  distill->callback([&] {
    apply_threads();
    Dataset ds = read_dataset(co.data);
    co.csd.tau2_rescale = !co.no_tau2;
    co.csd.loss_rescale = !co.no_rescale;
    EncoderConfig ec = encoder_preset(copt.encoder);
    DecoderConfig dc = decoder_preset(copt.decoder);
    Model<float> m(ec, dc, ds.vocab, copt.cfg.seed);
    ArtifactStore store =
        read_artifacts(co.artifacts, m.decoder().classes());
    std::printf("student %s + %s: %lld params, %zu artifacts\n",
                ec.name.c_str(), dc.name.c_str(),
                static_cast<long long>(m.total_params()), store.items.size());
    TrainStats stats =
        train_csd(m, ds, store, copt.cfg, co.csd, progress_printer);
    json extra{{"method", "csd"},
               {"alpha", co.csd.alpha},
               {"tau", co.csd.tau},
               {"final_loss", stats.final_loss()},
               {"skipped_samples", stats.skipped_samples}};
    save_checkpoint(co.out, m,
                    meta_for(m, ec, dc, copt.cfg.seed, copt.cfg.steps, extra));
    emit_manifest(co.out, "distill", raw_args, copt.cfg.seed, co.data);
    std::printf("final loss %.4f (%d skipped draws) -> %s\n",
                stats.final_loss(), stats.skipped_samples, co.out.c_str());
  });

  // ---- predict ----
  auto* predict = app.add_subcommand("predict", "JSON-lines predictions");
  struct {
    std::string data, ckpt, out = "-";
    bool no_refine = false;
    int limit = 0, chunk = 32;
  } pr;
  predict->add_option("--data", pr.data, "GLY1 dataset")->required();
  predict->add_option("--ckpt", pr.ckpt, "checkpoint")->required();
  predict->add_option("--out", pr.out, "output path ('-' = stdout)");
  predict->add_option("--limit", pr.limit, "stop after N images (0 = all)");
  predict->add_option("--chunk", pr.chunk, "images per forward pass");
  predict->add_flag("--no-refine", pr.no_refine, "skip the cloze round");
  predict->callback([&] {
    apply_threads();
    Dataset ds = read_dataset(pr.data);
    LoadedCheckpoint lc = load_checkpoint(pr.ckpt);
    require_same_vocab(*lc.model, ds);
    std::ofstream file;
    if (pr.out != "-") {
      file.open(pr.out);
      if (!file) throw DataError("cannot open '" + pr.out + "' for writing");
    }
    std::ostream& os = pr.out == "-" ? std::cout : file;
    const std::size_t n = pr.limit > 0
                              ? std::min<std::size_t>(ds.samples.size(),
                                                      std::size_t(pr.limit))
                              : ds.samples.size();
    for (std::size_t base = 0; base < n;
         base += static_cast<std::size_t>(pr.chunk)) {
      const std::size_t hi =
          std::min(n, base + static_cast<std::size_t>(pr.chunk));
      std::vector<const GlyphSample*> images;
      for (std::size_t i = base; i < hi; ++i)
        images.push_back(&ds.samples[i]);
      auto raw = greedy_decode_batch(*lc.model, images);
      auto refined = pr.no_refine
                         ? raw
                         : cloze_refine_batch(*lc.model, images, raw);
      for (std::size_t k = 0; k < images.size(); ++k)
        os << predict_line(lc.model->vocab(), static_cast<int>(base + k),
                           raw[k], refined[k])
           << '\n';
    }
    if (pr.out != "-")
      emit_manifest(pr.out, "predict", raw_args, lc.meta.init_seed, pr.data);
  });

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "word accuracy on a dataset");
  struct {
    std::string data, ckpt, report, run_id, method = "eval";
    bool no_refine = false;
    int chunk = 32;
    double noise = 0.0, alpha = 0.0, tau = 0.0, train_loss = 0.0;
    std::uint64_t seed = 0;
  } ev;
  eval->add_option("--data", ev.data, "GLY1 dataset")->required();
  eval->add_option("--ckpt", ev.ckpt, "checkpoint")->required();
  eval->add_option("--chunk", ev.chunk, "images per forward pass");
  eval->add_flag("--no-refine", ev.no_refine, "skip the cloze round");
  eval->add_option("--report", ev.report, "append a row to this CSV");
  eval->add_option("--run-id", ev.run_id, "row id (default: checkpoint stem)");
  eval->add_option("--method", ev.method, "row method tag");
  eval->add_option("--noise", ev.noise, "row noise rate");
  eval->add_option("--alpha", ev.alpha, "row alpha");
  eval->add_option("--tau", ev.tau, "row tau");
  eval->add_option("--seed", ev.seed, "row seed");
  eval->add_option("--train-loss", ev.train_loss, "row final train loss");
  eval->callback([&] {
    apply_threads();
    Dataset ds = read_dataset(ev.data);
    LoadedCheckpoint lc = load_checkpoint(ev.ckpt);
    require_same_vocab(*lc.model, ds);
    EvalResult res = evaluate(*lc.model, ds, !ev.no_refine, ev.chunk);
    std::printf("word_acc_clean %.4f  corrupted_subset %.4f  (n=%d, "
                "corrupted=%d)\n",
                res.acc_clean, res.acc_corrupted_subset, res.n,
                res.n_corrupted);
    if (!ev.report.empty()) {
      ReportRow row;
      row.run_id = ev.run_id.empty() ? stem_of(ev.ckpt) : ev.run_id;
      row.encoder = lc.meta.encoder.name;
      row.decoder = lc.meta.decoder.name;
      row.differential = lc.meta.decoder.differential;
      row.params = lc.model->total_params();
      row.gflops_at_5p5 =
          pair_gflops(lc.meta.encoder, lc.meta.decoder,
                      lc.model->vocab().charset_size(), 5.5);
      row.noise_rate = ev.noise;
      row.method = ev.method;
      row.alpha = ev.alpha;
      row.tau = ev.tau;
      row.seed = ev.seed;
      row.train_loss_final = ev.train_loss;
      row.word_acc_clean = res.acc_clean;
      row.word_acc_corruptedsubset = res.acc_corrupted_subset;
      append_report_row(ev.report, row);
    }
  });

  // ---- sweep ----
  auto* sweep =
      app.add_subcommand("sweep", "alpha x tau distillation grid + report");
  struct {
    std::string data, artifacts, out_dir = ".", report;
    std::vector<double> alphas{0.1, 0.5, 1.0};
    std::vector<double> taus{1.0, 2.0, 3.0};
    double noise = 0.0;
  } sw;
  TrainOpts sopt;
  sweep->add_option("--data", sw.data, "GLY1 dataset")->required();
  sweep->add_option("--artifacts", sw.artifacts, "CSD1 store")->required();
  sweep->add_option("--out-dir", sw.out_dir, "checkpoint directory");
  sweep->add_option("--report", sw.report, "CSV report path")->required();
  sweep->add_option("--alphas", sw.alphas, "KD weights")->delimiter(',');
  sweep->add_option("--taus", sw.taus, "temperatures")->delimiter(',');
  sweep->add_option("--noise", sw.noise, "noise rate recorded in rows");
  sopt.add_to(sweep);
  sweep->callback([&] {
    apply_threads();
    Dataset ds = read_dataset(sw.data);
    EncoderConfig ec = encoder_preset(sopt.encoder);
    DecoderConfig dc = decoder_preset(sopt.decoder);
    for (double alpha : sw.alphas) {
      for (double tau : sw.taus) {
        Model<float> m(ec, dc, ds.vocab, sopt.cfg.seed);
        ArtifactStore store =
            read_artifacts(sw.artifacts, m.decoder().classes());
        CsdConfig csd;
        csd.alpha = alpha;
        csd.tau = tau;
        char tag[64];
        std::snprintf(tag, sizeof tag, "csd_a%g_t%g", alpha, tau);
        std::printf("== %s ==\n", tag);
        TrainStats stats = train_csd(m, ds, store, sopt.cfg, csd, nullptr);
        EvalResult res = evaluate(m, ds, /*refine=*/true);
        const std::string ckpt = sw.out_dir + "/" + tag + ".pldc";
        json extra{{"method", "csd"}, {"alpha", alpha}, {"tau", tau}};
        save_checkpoint(ckpt, m, meta_for(m, ec, dc, sopt.cfg.seed,
                                          sopt.cfg.steps, extra));
        ReportRow row;
        row.run_id = tag;
        row.encoder = ec.name;
        row.decoder = dc.name;
        row.differential = dc.differential;
        row.params = m.total_params();
        row.gflops_at_5p5 =
            pair_gflops(ec, dc, ds.vocab.charset_size(), 5.5);
        row.noise_rate = sw.noise;
        row.method = "csd";
        row.alpha = alpha;
        row.tau = tau;
        row.seed = sopt.cfg.seed;
        row.train_loss_final = stats.final_loss();
        row.word_acc_clean = res.acc_clean;
        row.word_acc_corruptedsubset = res.acc_corrupted_subset;
        append_report_row(sw.report, row);
        std::printf("%s: acc %.4f / corrupted %.4f\n", tag, res.acc_clean,
                    res.acc_corrupted_subset);
      }
    }
    emit_manifest(sw.report, "sweep", raw_args, sopt.cfg.seed, sw.data);
  });

  // ---- count ----
  auto* count = app.add_subcommand("count", "parameter and FLOPs accounting");
  struct {
    std::string encoder = "vit-b", decoder = "pld-s", charset = "ascii94";
    double label_len = 5.5;
    bool table = false;
  } cn;
  count->add_option("--encoder", cn.encoder, "encoder preset");
  count->add_option("--decoder", cn.decoder, "decoder preset");
  count->add_option("--charset", cn.charset, "charset for the head");
  count->add_option("--label-len", cn.label_len, "decode length (chars)");
  count->add_flag("--table", cn.table, "print the full preset table");
  count->callback([&] {
    apply_threads();
    if (cn.table) {
      run_count_table();
      return;
    }
    Vocab v = make_vocab(cn.charset);
    EncoderConfig ec = encoder_preset(cn.encoder);
    DecoderConfig dc = decoder_preset(cn.decoder);
    const auto enc_specs = encoder_param_specs(ec);
    const auto dec_specs =
        decoder_param_specs(dc, v.charset_size(), kMaxLabelLen);
    std::printf("%s: %lld params, %.4f gflops\n", ec.name.c_str(),
                static_cast<long long>(count_params(enc_specs)),
                encoder_flops(ec) / 1e9);
    std::printf("%s: %lld params, %.4f gflops at L=%g\n", dc.name.c_str(),
                static_cast<long long>(count_params(dec_specs)),
                decoder_flops(dc, v.charset_size(), cn.label_len,
                              ec.num_patches()) /
                    1e9,
                cn.label_len);
    std::printf("total: %lld params, %.4f gflops\n",
                static_cast<long long>(count_params(enc_specs) +
                                       count_params(dec_specs)),
                pair_gflops(ec, dc, v.charset_size(), cn.label_len));
  });

  // ---- attnmaps ----
  auto* attn = app.add_subcommand(
      "attnmaps", "dump cloze-pass attention maps for one image");
  struct {
    std::string data, ckpt, out = "-";
    int index = 0;
  } am;
  attn->add_option("--data", am.data, "GLY1 dataset")->required();
  attn->add_option("--ckpt", am.ckpt, "checkpoint")->required();
  attn->add_option("--index", am.index, "sample index");
  attn->add_option("--out", am.out,
                   "output directory for per-layer/head PGM+CSV"
                   " ('-' = JSON to stdout)");
  attn->callback([&] {
    apply_threads();
    Dataset ds = read_dataset(am.data);
    LoadedCheckpoint lc = load_checkpoint(am.ckpt);
    require_same_vocab(*lc.model, ds);
    if (am.index < 0 || am.index >= static_cast<int>(ds.samples.size()))
      throw ConfigError("--index out of range");
    Model<float>& m = *lc.model;
    const GlyphSample& s = ds.samples[static_cast<std::size_t>(am.index)];
    auto pred = predict_batch(m, {&s}, /*refine=*/true)[0];
    if (pred.chars.empty())
      throw DataError("model predicted an empty string for this image");

    // rebuild the cloze workload with a recorder attached
    Tensor<float> vision = m.encoder().forward({&s});
    const int t = static_cast<int>(pred.chars.size()) + 1;
    DecodeItem<float> item;
    item.vision_index = 0;
    for (int p = 1; p <= t; ++p) {
      item.positions.push_back(p);
      item.context_positions.push_back(p);
    }
    item.context_chars = pred.chars;
    item.context_chars.push_back(m.decoder().eos_class());
    item.mask = mask_tensor<float>(cloze_mask(t), t, t + 1);
    AttnRecorder<float> rec;
    m.decoder().decode_batch(vision, m.encoder().num_tokens(), {item}, &rec);

    // the map invariant, surfaced per entry: standard attention rows sum to
    // 1.0; the differential combined map's rows sum to 1 - lambda
    auto mean_row_sum = [](const AttnRecorder<float>::Entry& e) {
      double total = 0.0;
      for (int r = 0; r < e.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < e.cols; ++c)
          s += e.weights[static_cast<std::size_t>(r) * e.cols + c];
        total += s;
      }
      return e.rows > 0 ? total / e.rows : 0.0;
    };
    std::printf("image %d prediction '%s'\n", am.index,
                m.vocab().decode(pred.chars).c_str());
    for (const auto& e : rec.entries)
      std::printf("block %d layer %d head %d: %dx%d, mean row sum %.6f\n",
                  e.block, e.layer, e.head, e.rows, e.cols, mean_row_sum(e));

    if (am.out == "-") {
      json entries = json::array();
      for (const auto& e : rec.entries)
        entries.push_back(json{{"block", e.block},
                               {"layer", e.layer},
                               {"head", e.head},
                               {"rows", e.rows},
                               {"cols", e.cols},
                               {"weights", e.weights}});
      json out{{"image_id", am.index},
               {"prediction", m.vocab().decode(pred.chars)},
               {"entries", entries}};
      std::cout << out.dump(2) << '\n';
    } else {
      std::error_code ec_mk;
      std::filesystem::create_directories(am.out, ec_mk);
      if (ec_mk)
        throw DataError("cannot create directory '" + am.out +
                        "': " + ec_mk.message());
      for (const auto& e : rec.entries) {
        char stem[64];
        std::snprintf(stem, sizeof stem, "block%d_layer%d_head%d", e.block,
                      e.layer, e.head);
        const std::string base = am.out + "/" + stem;
        // raw weights, one CSV row per query row
        std::ofstream csv(base + ".csv");
        if (!csv) throw DataError("cannot open '" + base + ".csv'");
        for (int r = 0; r < e.rows; ++r) {
          for (int c = 0; c < e.cols; ++c) {
            if (c) csv << ',';
            csv << e.weights[static_cast<std::size_t>(r) * e.cols + c];
          }
          csv << '\n';
        }
        // min-max scaled grayscale view (combined maps can go negative)
        float lo = e.weights[0], hi = e.weights[0];
        for (float w : e.weights) {
          lo = std::min(lo, w);
          hi = std::max(hi, w);
        }
        const float span = hi > lo ? hi - lo : 1.0f;
        std::ofstream pgm(base + ".pgm");
        if (!pgm) throw DataError("cannot open '" + base + ".pgm'");
        pgm << "P2\n" << e.cols << ' ' << e.rows << "\n255\n";
        for (int r = 0; r < e.rows; ++r) {
          for (int c = 0; c < e.cols; ++c) {
            const float w = e.weights[static_cast<std::size_t>(r) * e.cols + c];
            if (c) pgm << ' ';
            pgm << static_cast<int>(std::lround((w - lo) / span * 255.0f));
          }
          pgm << '\n';
        }
      }
      emit_manifest(am.out + "/maps", "attnmaps", raw_args, lc.meta.init_seed,
                    am.data);
      std::printf("wrote %zu maps to %s/\n", rec.entries.size(),
                  am.out.c_str());
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
