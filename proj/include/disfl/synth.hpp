#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disfl/corpus.hpp"
#include "disfl/rng.hpp"

namespace disfl {

/// Per-language word lists the injection rules draw from. All entries are
/// normalized tokens.
struct Lexicons {
  Tokens filled_pauses;
  Tokens interjections;
  std::vector<Tokens> discourse_markers;
  std::vector<Tokens> edit_phrases;

  /// Small English-like default set.
  static Lexicons english_default();

  /// Sectioned text file:
  ///   [filled_pause] / [interjection] / [discourse_marker] / [edit]
  /// one entry per line, multi-word entries space-separated, '#' comments.
  /// Entries pass through normalize().
  static Lexicons parse(std::string_view text);
  static Lexicons load(const std::filesystem::path& path);
  std::string serialize() const;

  bool operator==(const Lexicons&) const = default;
};

struct InjectOptions {
  /// Other fluent sentences, used as the source of false starts and of
  /// replacement words for EDIT reparanda.
  std::span<const Tokens> donors;
  /// Index of the sentence being edited within `donors`, skipped when drawing.
  std::optional<std::size_t> self_index;
  std::size_t stutter_max_fragments = 1;
  std::string language = "und";
};

/// Applies one disfluency of `type` to a fluent sentence. Inserted material is
/// DISFLUENT, every source token stays FLUENT and in order.
ParallelPair inject(const Tokens& fluent, DisfluencyType type, Rng& rng, const Lexicons& lex,
                    const InjectOptions& options = {});

/// Applies one more disfluency on top of an existing pair. Only FLUENT
/// tokens are copied, stuttered or replaced.
void inject_into(ParallelPair& pair, DisfluencyType type, Rng& rng, const Lexicons& lex,
                 const InjectOptions& options = {});

/// Whether `type` can be applied to `pair` with `lex`; never throws.
bool can_inject(const ParallelPair& pair, DisfluencyType type, const Lexicons& lex,
                const InjectOptions& options = {});

/// Strict prefix of `word` with 1..min(3, len-1) code points.
std::string stutter_fragment(const std::string& word, Rng& rng);

struct SynthConfig {
  double budget = 0.2;
  std::array<double, kNumDisfluencyTypes> type_weights{1, 1, 1, 1, 1, 1, 0};
  std::size_t max_injections_per_sentence = 3;
  std::size_t stutter_max_fragments = 2;
  std::uint64_t seed = 0;

  void validate() const;
  double weight(DisfluencyType type) const {
    return type_weights[static_cast<std::size_t>(type)];
  }
};

struct SynthStats {
  std::size_t fluent_tokens = 0;
  std::size_t disfluent_tokens = 0;
  std::array<std::size_t, kNumDisfluencyTypes> type_counts{};

  double disfluent_fraction() const;
};

struct SynthResult {
  Corpus corpus;
  SynthStats stats;
};

/// One pair per input sentence. Injection counts are chosen by error
/// diffusion over the running disfluent-token total so the corpus lands on
/// `cfg.budget`; raises BUDGET_UNREACHABLE if it ends more than 0.02 away.
/// `jobs` > 1 builds candidate sentences on worker threads; the output does
/// not depend on it.
SynthResult synthesize(std::span<const Tokens> fluent_sentences, const SynthConfig& cfg,
                       const Lexicons& lex, const std::string& language = "und",
                       std::size_t jobs = 1);

Corpus synthesize_corpus(std::span<const Tokens> fluent_sentences, const SynthConfig& cfg,
                         const Lexicons& lex, const std::string& language = "und");

inline constexpr double kBudgetTolerance = 0.02;

}  // namespace disfl
