#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disfl/artifact.hpp"
#include "disfl/corpus.hpp"
#include "disfl/seqgan.hpp"
#include "disfl/textnorm.hpp"

namespace disfl {

/// Micro-averaged token-level scores for the DISFLUENT class, in percent.
struct MetricReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Sentences whose corrected output equals the gold fluent side.
  double exact_match_rate = 0.0;
  std::size_t sentences = 0;
  std::size_t truncated_sentences = 0;
  std::size_t empty_corrections = 0;
  /// No gold or predicted DISFLUENT token anywhere; P/R/F1 reported as 0.
  bool degenerate = false;

  std::string to_key_value() const;
  std::string to_json() const;
};

/// FLUENT unless the disfluent logit is strictly larger.
template <class T>
Label argmax_label(T fluent_logit, T disfluent_logit) {
  return disfluent_logit > fluent_logit ? Label::Disfluent : Label::Fluent;
}

/// Micro counts over aligned label sequences; ALIGNMENT_ERROR on any length
/// mismatch. exact_match_rate compares label sequences.
MetricReport score(std::span<const Labels> gold, std::span<const Labels> pred);

/// Order-preserving filter keeping FLUENT tokens.
Tokens apply_correction(const Tokens& tokens, const Labels& labels);

/// Per-token labels for each sentence (truncated to max_len). `jobs` > 1
/// splits the sentences into contiguous chunks tagged on worker threads;
/// the result does not depend on it.
template <class T>
std::vector<Labels> predict(const model::SeqGan<T>& model, std::span<const Tokens> sentences,
                            const Vocabulary& vocab, std::size_t batch_size = 64, std::size_t jobs = 1);

/// Same, after checking the vocabulary against the model's metadata.
std::vector<Labels> predict(const LoadedModel& model, std::span<const Tokens> sentences, const Vocabulary& vocab,
                            std::size_t jobs = 1);

/// Predicts every labeled pair of `test` and scores against gold, truncating
/// gold to the model length. Exact match compares corrected token sequences.
MetricReport evaluate_corpus(const model::SeqGan<float>& model, const Corpus& test, const Vocabulary& vocab,
                             std::size_t jobs = 1);

struct MeanStd {
  double mean = 0.0;
  double stdev = 0.0;
};

MeanStd mean_std(std::span<const double> values);

/// Plain-text comparison table, one row per named report.
std::string render_table(std::span<const std::pair<std::string, MetricReport>> rows);

}  // namespace disfl
