#include "disfl/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iterator>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "disfl/batching.hpp"
#include "disfl/errors.hpp"

namespace disfl {

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void finish(MetricReport& r) {
  r.precision = r.tp + r.fp > 0 ? 100.0 * static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? 100.0 * static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.degenerate = r.tp + r.fp + r.fn == 0;
}

}  // namespace

MetricReport score(std::span<const Labels> gold, std::span<const Labels> pred) {
  if (gold.size() != pred.size()) {
    fail(ErrorCode::AlignmentError, std::to_string(gold.size()) + " gold sentences but " +
                                        std::to_string(pred.size()) + " predicted");
  }
  MetricReport r;
  r.sentences = gold.size();
  std::size_t exact = 0;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) {
      fail(ErrorCode::AlignmentError, "sentence " + std::to_string(s) + ": " + std::to_string(gold[s].size()) +
                                          " gold labels but " + std::to_string(pred[s].size()) + " predicted");
    }
    for (std::size_t i = 0; i < gold[s].size(); ++i) {
      const bool g = gold[s][i] == Label::Disfluent;
      const bool p = pred[s][i] == Label::Disfluent;
      r.tp += g && p;
      r.fp += !g && p;
      r.fn += g && !p;
    }
    exact += gold[s] == pred[s];
    r.empty_corrections += std::find(pred[s].begin(), pred[s].end(), Label::Fluent) == pred[s].end();
  }
  r.exact_match_rate = gold.empty() ? 0.0 : 100.0 * static_cast<double>(exact) / static_cast<double>(gold.size());
  finish(r);
  return r;
}

Tokens apply_correction(const Tokens& tokens, const Labels& labels) { return filter_fluent(tokens, labels); }

template <class T>
std::vector<Labels> predict_serial(const model::SeqGan<T>& model, std::span<const Tokens> sentences,
                                   const Vocabulary& vocab, std::size_t batch_size) {
  const std::size_t max_len = model.config().encoder.max_len;
  std::vector<Labels> out;
  out.reserve(sentences.size());
  tc::NoGradGuard no_grad;
  for (std::size_t start = 0; start < sentences.size(); start += batch_size) {
    const std::size_t end = std::min(sentences.size(), start + batch_size);
    model::Batch batch;
    for (std::size_t s = start; s < end; ++s) {
      if (sentences[s].empty()) fail(ErrorCode::FormatError, "cannot tag an empty sentence");
      batch.append(encode_unlabeled(sentences[s], vocab, max_len));
    }
    const auto logits = model.discriminate(model.encode(batch)).token_logits.value();
    for (std::size_t s = start; s < end; ++s) {
      const std::size_t row0 = (s - start) * max_len;
      const std::size_t n = std::min(sentences[s].size(), max_len);
      Labels labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = argmax_label(logits.at(row0 + i, 0), logits.at(row0 + i, 1));
      out.push_back(std::move(labels));
    }
  }
  return out;
}

template <class T>
std::vector<Labels> predict(const model::SeqGan<T>& model, std::span<const Tokens> sentences,
                            const Vocabulary& vocab, std::size_t batch_size, std::size_t jobs) {
  if (batch_size == 0) fail(ErrorCode::ConfigError, "batch size must be positive");
  jobs = std::max<std::size_t>(1, std::min(jobs, sentences.size()));
  if (jobs == 1) return predict_serial(model, sentences, vocab, batch_size);
  std::vector<std::vector<Labels>> parts(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  const std::size_t chunk = (sentences.size() + jobs - 1) / jobs;
  for (std::size_t j = 0; j < jobs; ++j) {
    const std::size_t begin = std::min(sentences.size(), j * chunk);
    const std::size_t end = std::min(sentences.size(), begin + chunk);
    workers.emplace_back([&, j, begin, end] {
      try {
        parts[j] = predict_serial(model, sentences.subspan(begin, end - begin), vocab, batch_size);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Labels> out;
  out.reserve(sentences.size());
  for (auto& part : parts) std::move(part.begin(), part.end(), std::back_inserter(out));
  return out;
}

std::vector<Labels> predict(const LoadedModel& loaded, std::span<const Tokens> sentences, const Vocabulary& vocab,
                            std::size_t jobs) {
  require_vocab(loaded.metadata, vocab);
  return predict(loaded.model, sentences, vocab, 64, jobs);
}

MetricReport evaluate_corpus(const model::SeqGan<float>& model, const Corpus& test, const Vocabulary& vocab,
                             std::size_t jobs) {
  const std::size_t max_len = model.config().encoder.max_len;
  std::vector<Tokens> sentences;
  std::vector<Labels> gold;
  std::size_t truncated = 0;
  for (const auto& pair : test.labeled) {
    sentences.push_back(pair.disfluent.tokens);
    const std::size_t n = std::min(pair.disfluent.labels.size(), max_len);
    truncated += pair.disfluent.labels.size() > max_len;
    gold.emplace_back(pair.disfluent.labels.begin(), pair.disfluent.labels.begin() + static_cast<std::ptrdiff_t>(n));
  }
  const auto pred = predict(model, std::span<const Tokens>(sentences), vocab, 64, jobs);
  MetricReport report = score(gold, pred);
  report.truncated_sentences = truncated;
  std::size_t exact = 0;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const Tokens head(sentences[s].begin(), sentences[s].begin() + static_cast<std::ptrdiff_t>(pred[s].size()));
    exact += apply_correction(head, pred[s]) == apply_correction(head, gold[s]);
  }
  report.exact_match_rate =
      sentences.empty() ? 0.0 : 100.0 * static_cast<double>(exact) / static_cast<double>(sentences.size());
  return report;
}

std::string MetricReport::to_key_value() const {
  std::string out = "# token-level DISFLUENT class, micro-averaged\n";
  out += "tp=" + std::to_string(tp) + "\n";
  out += "fp=" + std::to_string(fp) + "\n";
  out += "fn=" + std::to_string(fn) + "\n";
  out += "precision=" + fixed2(precision) + "\n";
  out += "recall=" + fixed2(recall) + "\n";
  out += "f1=" + fixed2(f1) + "\n";
  out += "exact_match_rate=" + fixed2(exact_match_rate) + "\n";
  out += "sentences=" + std::to_string(sentences) + "\n";
  out += "truncated_sentences=" + std::to_string(truncated_sentences) + "\n";
  out += "empty_corrections=" + std::to_string(empty_corrections) + "\n";
  out += std::string("degenerate=") + (degenerate ? "true" : "false") + "\n";
  return out;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["averaging"] = "micro";
  j["class"] = "DISFLUENT";
  j["tp"] = tp;
  j["fp"] = fp;
  j["fn"] = fn;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["exact_match_rate"] = exact_match_rate;
  j["sentences"] = sentences;
  j["truncated_sentences"] = truncated_sentences;
  j["empty_corrections"] = empty_corrections;
  j["degenerate"] = degenerate;
  return j.dump(2) + "\n";
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {};
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double stdev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  return {mean, stdev};
}

std::string render_table(std::span<const std::pair<std::string, MetricReport>> rows) {
  std::size_t width = 5;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  auto lpad = [](std::string s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
  std::string out = pad("Model", width) + " | " + lpad("P", 6) + " | " + lpad("R", 6) + " | " + lpad("F1", 6) + "\n";
  out += std::string(width, '-') + "-+-" + std::string(6, '-') + "-+-" + std::string(6, '-') + "-+-" +
         std::string(6, '-') + "\n";
  for (const auto& [name, r] : rows) {
    out += pad(name, width) + " | " + lpad(fixed2(r.precision), 6) + " | " + lpad(fixed2(r.recall), 6) + " | " +
           lpad(fixed2(r.f1), 6) + "\n";
  }
  return out;
}

template std::vector<Labels> predict(const model::SeqGan<float>&, std::span<const Tokens>, const Vocabulary&,
                                     std::size_t, std::size_t);
template std::vector<Labels> predict(const model::SeqGan<double>&, std::span<const Tokens>, const Vocabulary&,
                                     std::size_t, std::size_t);

}  // namespace disfl
