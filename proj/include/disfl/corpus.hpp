#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace disfl {

using Tokens = std::vector<std::string>;

enum class Label : std::uint8_t { Fluent = 0, Disfluent = 1 };

/// "F" / "D".
char label_char(Label label);
std::optional<Label> parse_label(std::string_view text);

using Labels = std::vector<Label>;

enum class DisfluencyType : std::uint8_t {
  FilledPause,
  Interjection,
  DiscourseMarker,
  RepetitionCorrection,
  FalseStart,
  Edit,
  Stutter,
};

inline constexpr std::size_t kNumDisfluencyTypes = 7;
inline constexpr DisfluencyType kAllDisfluencyTypes[kNumDisfluencyTypes] = {
    DisfluencyType::FilledPause,          DisfluencyType::Interjection,
    DisfluencyType::DiscourseMarker,      DisfluencyType::RepetitionCorrection,
    DisfluencyType::FalseStart,           DisfluencyType::Edit,
    DisfluencyType::Stutter,
};

std::string_view to_string(DisfluencyType type);
std::optional<DisfluencyType> parse_disfluency_type(std::string_view name);

struct TaggedSentence {
  Tokens tokens;
  Labels labels;
  std::string language;

  /// Throws LENGTH_MISMATCH or FORMAT_ERROR.
  void validate() const;

  bool operator==(const TaggedSentence&) const = default;
};

/// Disfluent side plus its gold correction.
struct ParallelPair {
  TaggedSentence disfluent;
  Tokens fluent;

  /// Throws if dropping DISFLUENT tokens does not give back `fluent`.
  void validate() const;

  bool operator==(const ParallelPair&) const = default;
};

struct UnlabeledSentence {
  Tokens tokens;
  /// Language tag of the corpus the sentence came from.
  std::string source;

  bool operator==(const UnlabeledSentence&) const = default;
};

struct Corpus {
  std::vector<ParallelPair> labeled;
  std::vector<UnlabeledSentence> unlabeled;
  std::string language;

  void validate() const;
  std::size_t token_count() const;

  bool operator==(const Corpus&) const = default;
};

/// Keeps FLUENT tokens in order. Throws ALIGNMENT_ERROR on length mismatch.
Tokens filter_fluent(const Tokens& tokens, const Labels& labels);

/// Wraps an already fluent sentence as a pair with all-FLUENT labels.
ParallelPair fluent_pair(Tokens fluent, std::string language);

enum class CorpusFormat { Jsonl, Tsv };

std::optional<CorpusFormat> parse_corpus_format(std::string_view name);
/// Picks TSV for *.tsv paths, JSONL otherwise.
CorpusFormat format_for_path(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

/// Canonical text form; save_corpus writes exactly these bytes.
std::string serialize_corpus(const Corpus& corpus, CorpusFormat format);
Corpus parse_corpus(std::string_view text, CorpusFormat format);

/// Seeded shuffle, then the first `n_train` labeled pairs go to train.
/// Unlabeled sentences stay with train.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, std::size_t n_train,
                                       std::uint64_t seed);

/// Labeled side from `labeled_src`; every sentence of `unlabeled_src`
/// (labeled ones stripped of labels) becomes unlabeled data.
Corpus mix_corpora(const Corpus& labeled_src, const Corpus& unlabeled_src);

}  // namespace disfl
