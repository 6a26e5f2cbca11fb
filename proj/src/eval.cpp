#include "pldlab/eval.hpp"

#include <cstdio>
#include <fstream>

#include "pldlab/vocab.hpp"

namespace pldlab {

double word_accuracy(const std::vector<std::string>& preds,
                     const std::vector<std::string>& refs, bool fold) {
  if (preds.size() != refs.size())
    throw DataError("word_accuracy: " + std::to_string(preds.size()) +
                    " predictions vs " + std::to_string(refs.size()) +
                    " references");
  if (preds.empty()) throw DataError("word_accuracy: empty input");
  int ok = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool hit = fold ? Vocab::fold(preds[i]) == Vocab::fold(refs[i])
                          : preds[i] == refs[i];
    if (hit) ++ok;
  }
  return double(ok) / double(preds.size());
}

namespace {

constexpr const char* kReportHeader =
    "run_id,encoder,decoder,differential,params,gflops_at_5p5,noise_rate,"
    "method,alpha,tau,seed,train_loss_final,word_acc_clean,"
    "word_acc_corruptedsubset";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_row(std::ostream& f, const ReportRow& r) {
  f << r.run_id << ',' << r.encoder << ',' << r.decoder << ','
    << (r.differential ? 1 : 0) << ',' << r.params << ','
    << fmt(r.gflops_at_5p5) << ',' << fmt(r.noise_rate) << ',' << r.method
    << ',' << fmt(r.alpha) << ',' << fmt(r.tau) << ',' << r.seed << ','
    << fmt(r.train_loss_final) << ',' << fmt(r.word_acc_clean) << ','
    << fmt(r.word_acc_corruptedsubset) << '\n';
}

}  // namespace

void write_report_csv(const std::string& path,
                      const std::vector<ReportRow>& rows) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << kReportHeader << '\n';
  for (const auto& r : rows) write_row(f, r);
  if (!f.good()) throw DataError("write failed for '" + path + "'");
}

void append_report_row(const std::string& path, const ReportRow& row) {
  const bool fresh = !std::ifstream(path).good();
  std::ofstream f(path, std::ios::app);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  if (fresh) f << kReportHeader << '\n';
  write_row(f, row);
  if (!f.good()) throw DataError("write failed for '" + path + "'");
}

}  // namespace pldlab
