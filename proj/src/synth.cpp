#include "disfl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "disfl/errors.hpp"
#include "disfl/textnorm.hpp"
#include "disfl/unicode.hpp"

namespace disfl {

namespace {

void insert_disfluent(ParallelPair& pair, std::size_t pos, const Tokens& material) {
  auto& s = pair.disfluent;
  s.tokens.insert(s.tokens.begin() + static_cast<std::ptrdiff_t>(pos), material.begin(), material.end());
  s.labels.insert(s.labels.begin() + static_cast<std::ptrdiff_t>(pos), material.size(), Label::Disfluent);
}

std::vector<std::size_t> fluent_positions(const TaggedSentence& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (s.labels[i] == Label::Fluent) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> stutterable_positions(const TaggedSentence& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (s.labels[i] == Label::Fluent && unicode::length(s.tokens[i]) >= 2) out.push_back(i);
  }
  return out;
}

// Start positions of all-FLUENT windows of the given width.
std::vector<std::size_t> fluent_windows(const TaggedSentence& s, std::size_t width) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + width <= s.labels.size(); ++i) {
    bool ok = true;
    for (std::size_t j = i; j < i + width; ++j) ok = ok && s.labels[j] == Label::Fluent;
    if (ok) out.push_back(i);
  }
  return out;
}

std::size_t donor_count(const InjectOptions& opt) {
  const bool self_inside = opt.self_index && *opt.self_index < opt.donors.size();
  return opt.donors.size() - (self_inside ? 1 : 0);
}

const Tokens* draw_donor(Rng& rng, const InjectOptions& opt) {
  const std::size_t n = donor_count(opt);
  if (n == 0) return nullptr;
  std::size_t j = uniform_index(rng, n);
  if (opt.self_index && *opt.self_index < opt.donors.size() && j >= *opt.self_index) ++j;
  const Tokens& donor = opt.donors[j];
  return donor.empty() ? nullptr : &donor;
}

bool has_two_distinct(const Tokens& tokens) {
  return std::any_of(tokens.begin(), tokens.end(), [&](const auto& t) { return t != tokens.front(); });
}

std::string draw_replacement(const std::string& target, const Tokens& own, Rng& rng,
                             const InjectOptions& opt) {
  auto pick_other = [&](const Tokens& pool) -> std::optional<std::string> {
    std::vector<const std::string*> candidates;
    for (const auto& t : pool) {
      if (t != target) candidates.push_back(&t);
    }
    if (candidates.empty()) return std::nullopt;
    return *candidates[uniform_index(rng, candidates.size())];
  };
  if (const Tokens* donor = draw_donor(rng, opt)) {
    if (auto word = pick_other(*donor)) return *word;
  }
  if (auto word = pick_other(own)) return *word;
  for (std::size_t j = 0; j < opt.donors.size(); ++j) {
    if (opt.self_index && j == *opt.self_index) continue;
    if (auto word = pick_other(opt.donors[j])) return *word;
  }
  fail(ErrorCode::PreconditionError, "EDIT needs a word different from '" + target + "' to corrupt it into");
}

void require_lexicon(bool present, DisfluencyType type) {
  if (!present) {
    fail(ErrorCode::LexiconError, "lexicon list required by " + std::string(to_string(type)) + " is empty");
  }
}

[[noreturn]] void too_short(DisfluencyType type, const std::string& need) {
  fail(ErrorCode::PreconditionError, std::string(to_string(type)) + " needs " + need);
}

}  // namespace

Lexicons Lexicons::english_default() {
  Lexicons lex;
  lex.filled_pauses = {"uh", "um", "er", "ah", "hmm"};
  lex.interjections = {"ugh", "oh", "wow", "yeah", "huh"};
  lex.discourse_markers = {{"well"}, {"you", "know"}, {"i", "mean"}, {"so"}, {"like"}, {"actually"}};
  lex.edit_phrases = {{"im", "sorry"}, {"i", "mean"}, {"sorry"}, {"no", "wait"}, {"or", "rather"}};
  return lex;
}

Lexicons Lexicons::parse(std::string_view text) {
  Lexicons lex;
  enum class Section { None, FilledPause, Interjection, DiscourseMarker, Edit } section = Section::None;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string trimmed = line.substr(first, line.find_last_not_of(" \t") - first + 1);
    if (trimmed.front() == '[') {
      if (trimmed == "[filled_pause]") section = Section::FilledPause;
      else if (trimmed == "[interjection]") section = Section::Interjection;
      else if (trimmed == "[discourse_marker]") section = Section::DiscourseMarker;
      else if (trimmed == "[edit]") section = Section::Edit;
      else fail(ErrorCode::LexiconError, "line " + std::to_string(line_no) + ": unknown section " + trimmed);
      continue;
    }
    Tokens entry = normalize(trimmed);
    if (entry.empty()) continue;
    switch (section) {
      case Section::None:
        fail(ErrorCode::LexiconError, "line " + std::to_string(line_no) + ": entry outside any section");
      case Section::FilledPause:
      case Section::Interjection:
        if (entry.size() != 1) {
          fail(ErrorCode::LexiconError,
               "line " + std::to_string(line_no) + ": filled pauses and interjections are single tokens");
        }
        (section == Section::FilledPause ? lex.filled_pauses : lex.interjections).push_back(entry.front());
        break;
      case Section::DiscourseMarker: lex.discourse_markers.push_back(std::move(entry)); break;
      case Section::Edit: lex.edit_phrases.push_back(std::move(entry)); break;
    }
  }
  return lex;
}

Lexicons Lexicons::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::LexiconError, "cannot open lexicon '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string Lexicons::serialize() const {
  auto join = [](const Tokens& t) {
    std::string s;
    for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  std::string out = "[filled_pause]\n";
  for (const auto& w : filled_pauses) out += w + "\n";
  out += "[interjection]\n";
  for (const auto& w : interjections) out += w + "\n";
  out += "[discourse_marker]\n";
  for (const auto& e : discourse_markers) out += join(e) + "\n";
  out += "[edit]\n";
  for (const auto& e : edit_phrases) out += join(e) + "\n";
  return out;
}

std::string stutter_fragment(const std::string& word, Rng& rng) {
  const std::size_t len = unicode::length(word);
  if (len < 2) {
    fail(ErrorCode::PreconditionError, "cannot stutter the one-character word '" + word + "'");
  }
  return unicode::prefix(word, uniform_between(rng, 1, std::min<std::size_t>(3, len - 1)));
}

bool can_inject(const ParallelPair& pair, DisfluencyType type, const Lexicons& lex,
                const InjectOptions& options) {
  const auto& s = pair.disfluent;
  switch (type) {
    case DisfluencyType::FilledPause: return !lex.filled_pauses.empty();
    case DisfluencyType::Interjection: return !lex.interjections.empty();
    case DisfluencyType::DiscourseMarker: return !lex.discourse_markers.empty();
    case DisfluencyType::RepetitionCorrection: return !pair.fluent.empty();
    case DisfluencyType::FalseStart: return pair.fluent.size() >= 2;
    case DisfluencyType::Edit:
      return !lex.edit_phrases.empty() && !pair.fluent.empty() &&
             (has_two_distinct(pair.fluent) || donor_count(options) > 0);
    case DisfluencyType::Stutter: return !stutterable_positions(s).empty();
  }
  return false;
}

void inject_into(ParallelPair& pair, DisfluencyType type, Rng& rng, const Lexicons& lex,
                 const InjectOptions& options) {
  auto& s = pair.disfluent;
  const std::size_t n = s.tokens.size();
  switch (type) {
    case DisfluencyType::FilledPause: {
      require_lexicon(!lex.filled_pauses.empty(), type);
      const std::size_t pos = uniform_between(rng, 0, n);
      insert_disfluent(pair, pos, {lex.filled_pauses[uniform_index(rng, lex.filled_pauses.size())]});
      break;
    }
    case DisfluencyType::Interjection: {
      require_lexicon(!lex.interjections.empty(), type);
      // Half of all interjections open the utterance.
      const bool lead = std::bernoulli_distribution(0.5)(rng);
      const std::size_t pos = lead ? 0 : uniform_between(rng, 0, n);
      insert_disfluent(pair, pos, {lex.interjections[uniform_index(rng, lex.interjections.size())]});
      break;
    }
    case DisfluencyType::DiscourseMarker: {
      require_lexicon(!lex.discourse_markers.empty(), type);
      insert_disfluent(pair, 0, lex.discourse_markers[uniform_index(rng, lex.discourse_markers.size())]);
      break;
    }
    case DisfluencyType::RepetitionCorrection: {
      auto windows = fluent_windows(s, 2);
      std::size_t width = 2;
      if (windows.empty() || std::bernoulli_distribution(0.5)(rng)) {
        windows = fluent_windows(s, 1);
        width = 1;
      }
      if (windows.empty()) too_short(type, "at least one fluent token");
      const std::size_t start = windows[uniform_index(rng, windows.size())];
      const Tokens copy(s.tokens.begin() + static_cast<std::ptrdiff_t>(start),
                        s.tokens.begin() + static_cast<std::ptrdiff_t>(start + width));
      insert_disfluent(pair, start, copy);
      break;
    }
    case DisfluencyType::FalseStart: {
      if (pair.fluent.size() < 2) too_short(type, "at least two tokens");
      Tokens fragment;
      if (const Tokens* donor = draw_donor(rng, options)) {
        const std::size_t k = uniform_between(rng, 1, std::min<std::size_t>(3, donor->size()));
        fragment.assign(donor->begin(), donor->begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        const std::size_t m = pair.fluent.size();
        const std::size_t k = uniform_between(rng, 1, std::min<std::size_t>(3, m - 1));
        fragment.assign(pair.fluent.end() - static_cast<std::ptrdiff_t>(k), pair.fluent.end());
      }
      insert_disfluent(pair, 0, fragment);
      break;
    }
    case DisfluencyType::Edit: {
      require_lexicon(!lex.edit_phrases.empty(), type);
      const auto targets = fluent_positions(s);
      if (targets.empty()) too_short(type, "at least one fluent token");
      const std::size_t pos = targets[uniform_index(rng, targets.size())];
      Tokens material{draw_replacement(s.tokens[pos], pair.fluent, rng, options)};
      const auto& phrase = lex.edit_phrases[uniform_index(rng, lex.edit_phrases.size())];
      material.insert(material.end(), phrase.begin(), phrase.end());
      insert_disfluent(pair, pos, material);
      break;
    }
    case DisfluencyType::Stutter: {
      const auto targets = stutterable_positions(s);
      if (targets.empty()) too_short(type, "a fluent word of at least two characters");
      const std::size_t pos = targets[uniform_index(rng, targets.size())];
      const std::string fragment = stutter_fragment(s.tokens[pos], rng);
      const std::size_t copies = uniform_between(rng, 1, std::max<std::size_t>(1, options.stutter_max_fragments));
      insert_disfluent(pair, pos, Tokens(copies, fragment));
      break;
    }
  }
}

ParallelPair inject(const Tokens& fluent, DisfluencyType type, Rng& rng, const Lexicons& lex,
                    const InjectOptions& options) {
  if (fluent.empty()) fail(ErrorCode::PreconditionError, "cannot inject into an empty sentence");
  ParallelPair pair = fluent_pair(fluent, options.language);
  inject_into(pair, type, rng, lex, options);
  return pair;
}

void SynthConfig::validate() const {
  if (!(budget > 0.0 && budget < 1.0)) fail(ErrorCode::ConfigError, "budget must lie in (0, 1)");
  bool any_positive = false;
  for (double w : type_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::ConfigError, "type weights must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) fail(ErrorCode::ConfigError, "at least one type weight must be positive");
}

double SynthStats::disfluent_fraction() const {
  const std::size_t total = fluent_tokens + disfluent_tokens;
  return total == 0 ? 0.0 : static_cast<double>(disfluent_tokens) / static_cast<double>(total);
}

namespace {

// Sentence after 0, 1, ..., k injections, all drawn from the sentence's own
// seed-split generator.
struct Chain {
  std::vector<ParallelPair> states;
  std::vector<DisfluencyType> types;
};

Chain build_chain(std::span<const Tokens> sentences, std::size_t index, const SynthConfig& cfg,
                  const Lexicons& lex, const std::string& language) {
  Rng rng(split_seed(stream_seed(cfg.seed, Stream::Synthesis), index));
  InjectOptions options;
  options.donors = sentences;
  options.self_index = index;
  options.stutter_max_fragments = cfg.stutter_max_fragments;
  options.language = language;

  Chain chain;
  chain.states.push_back(fluent_pair(sentences[index], language));
  for (std::size_t k = 0; k < cfg.max_injections_per_sentence; ++k) {
    const ParallelPair& current = chain.states.back();
    std::array<double, kNumDisfluencyTypes> weights{};
    bool any = false;
    for (auto type : kAllDisfluencyTypes) {
      const double w = cfg.weight(type);
      if (w > 0.0 && can_inject(current, type, lex, options)) {
        weights[static_cast<std::size_t>(type)] = w;
        any = true;
      }
    }
    if (!any) break;
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const auto type = static_cast<DisfluencyType>(pick(rng));
    ParallelPair next = current;
    inject_into(next, type, rng, lex, options);
    chain.states.push_back(std::move(next));
    chain.types.push_back(type);
  }
  return chain;
}

std::size_t disfluent_count(const ParallelPair& pair) {
  return static_cast<std::size_t>(
      std::count(pair.disfluent.labels.begin(), pair.disfluent.labels.end(), Label::Disfluent));
}

}  // namespace

SynthResult synthesize(std::span<const Tokens> fluent_sentences, const SynthConfig& cfg, const Lexicons& lex,
                       const std::string& language, std::size_t jobs) {
  cfg.validate();
  for (auto type : kAllDisfluencyTypes) {
    if (cfg.weight(type) <= 0.0) continue;
    if (type == DisfluencyType::FilledPause) require_lexicon(!lex.filled_pauses.empty(), type);
    if (type == DisfluencyType::Interjection) require_lexicon(!lex.interjections.empty(), type);
    if (type == DisfluencyType::DiscourseMarker) require_lexicon(!lex.discourse_markers.empty(), type);
    if (type == DisfluencyType::Edit) require_lexicon(!lex.edit_phrases.empty(), type);
  }
  for (std::size_t i = 0; i < fluent_sentences.size(); ++i) {
    if (fluent_sentences[i].empty()) {
      fail(ErrorCode::PreconditionError, "fluent sentence " + std::to_string(i) + " is empty");
    }
  }

  const std::size_t n = fluent_sentences.size();
  std::vector<Chain> chains(n);
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) chains[i] = build_chain(fluent_sentences, i, cfg, lex, language);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += jobs) {
            chains[i] = build_chain(fluent_sentences, i, cfg, lex, language);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Error diffusion: after sentence i the running disfluent total tracks
  // ratio * (fluent tokens so far), ratio = budget / (1 - budget).
  const double ratio = cfg.budget / (1.0 - cfg.budget);
  SynthResult result;
  result.corpus.language = language;
  std::size_t fluent_so_far = 0;
  std::size_t disfluent_so_far = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fluent_so_far += fluent_sentences[i].size();
    const double target = ratio * static_cast<double>(fluent_so_far);
    std::size_t best = 0;
    double best_gap = 0.0;
    for (std::size_t k = 0; k < chains[i].states.size(); ++k) {
      const double gap =
          std::abs(static_cast<double>(disfluent_so_far + disfluent_count(chains[i].states[k])) - target);
      if (k == 0 || gap < best_gap) {
        best = k;
        best_gap = gap;
      }
    }
    disfluent_so_far += disfluent_count(chains[i].states[best]);
    for (std::size_t k = 0; k < best; ++k) ++result.stats.type_counts[static_cast<std::size_t>(chains[i].types[k])];
    result.corpus.labeled.push_back(std::move(chains[i].states[best]));
  }
  result.stats.fluent_tokens = fluent_so_far;
  result.stats.disfluent_tokens = disfluent_so_far;

  const double achieved = result.stats.disfluent_fraction();
  if (n > 0 && std::abs(achieved - cfg.budget) > kBudgetTolerance) {
    std::ostringstream msg;
    msg << "disfluent fraction " << achieved << " is outside budget " << cfg.budget << " +/- "
        << kBudgetTolerance << " with at most " << cfg.max_injections_per_sentence << " injections per sentence";
    fail(ErrorCode::BudgetUnreachable, msg.str());
  }
  return result;
}

Corpus synthesize_corpus(std::span<const Tokens> fluent_sentences, const SynthConfig& cfg, const Lexicons& lex,
                         const std::string& language) {
  return synthesize(fluent_sentences, cfg, lex, language).corpus;
}

}  // namespace disfl
