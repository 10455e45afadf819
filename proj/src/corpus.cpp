#include "disfl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "disfl/errors.hpp"
#include "disfl/rng.hpp"
#include "disfl/unicode.hpp"

namespace disfl {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kUndetermined = "und";

void validate_tokens(const Tokens& tokens, std::string_view what) {
  for (const auto& token : tokens) {
    if (token.empty()) fail(ErrorCode::FormatError, std::string(what) + ": empty token");
    if (!unicode::is_valid_utf8(token)) {
      fail(ErrorCode::FormatError, std::string(what) + ": token is not valid UTF-8");
    }
    if (unicode::contains_whitespace(token)) {
      fail(ErrorCode::FormatError, std::string(what) + ": token '" + token + "' contains whitespace");
    }
  }
}

[[noreturn]] void fail_at(ErrorCode code, std::size_t line, const std::string& message) {
  fail(code, "line " + std::to_string(line) + ": " + message);
}

// Re-raises a validation failure with the offending line number attached.
template <class Fn>
void at_line(std::size_t line, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    std::string what = e.what();
    const auto colon = what.find(": ");
    fail_at(e.code(), line, colon == std::string::npos ? what : what.substr(colon + 2));
  }
}

Tokens json_tokens(const ordered_json& value, std::string_view field) {
  if (!value.is_array()) fail(ErrorCode::FormatError, "'" + std::string(field) + "' must be an array");
  Tokens out;
  out.reserve(value.size());
  for (const auto& item : value) {
    if (!item.is_string()) {
      fail(ErrorCode::FormatError, "'" + std::string(field) + "' must contain strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

Labels json_labels(const ordered_json& value) {
  if (!value.is_array()) fail(ErrorCode::FormatError, "'labels' must be an array");
  Labels out;
  out.reserve(value.size());
  for (const auto& item : value) {
    std::optional<Label> label;
    if (item.is_string()) label = parse_label(item.get<std::string>());
    if (!label) fail(ErrorCode::FormatError, "labels must be \"F\" or \"D\"");
    out.push_back(*label);
  }
  return out;
}

Corpus parse_jsonl(std::string_view text) {
  Corpus corpus;
  std::optional<std::string> header_lang;
  std::optional<std::string> first_lang;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail_at(ErrorCode::FormatError, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) fail_at(ErrorCode::FormatError, line_no, "record must be a JSON object");

    if (record.contains("corpus")) {
      const auto& meta = record["corpus"];
      if (!meta.is_object() || !meta.contains("lang") || !meta["lang"].is_string()) {
        fail_at(ErrorCode::FormatError, line_no, "corpus header needs a string 'lang'");
      }
      header_lang = meta["lang"].get<std::string>();
      continue;
    }
    for (const auto& [key, _] : record.items()) {
      if (key != "tokens" && key != "labels" && key != "fluent" && key != "lang") {
        fail_at(ErrorCode::FormatError, line_no, "unknown field '" + key + "'");
      }
    }
    if (!record.contains("tokens")) fail_at(ErrorCode::FormatError, line_no, "missing 'tokens'");

    at_line(line_no, [&] {
      std::optional<std::string> lang;
      if (record.contains("lang")) {
        if (!record["lang"].is_string()) fail(ErrorCode::FormatError, "'lang' must be a string");
        lang = record["lang"].get<std::string>();
        if (!first_lang) first_lang = lang;
      }
      const std::string sentence_lang =
          lang.value_or(header_lang.value_or(std::string(kUndetermined)));
      Tokens tokens = json_tokens(record["tokens"], "tokens");

      if (!record.contains("labels")) {
        if (record.contains("fluent")) fail(ErrorCode::FormatError, "'fluent' given without 'labels'");
        if (tokens.empty()) fail(ErrorCode::FormatError, "sentence has no tokens");
        validate_tokens(tokens, "tokens");
        corpus.unlabeled.push_back({std::move(tokens), sentence_lang});
        return;
      }

      ParallelPair pair;
      pair.disfluent.tokens = std::move(tokens);
      pair.disfluent.labels = json_labels(record["labels"]);
      pair.disfluent.language = sentence_lang;
      pair.disfluent.validate();
      if (record.contains("fluent")) {
        pair.fluent = json_tokens(record["fluent"], "fluent");
        pair.validate();
      } else {
        pair.fluent = filter_fluent(pair.disfluent.tokens, pair.disfluent.labels);
      }
      corpus.labeled.push_back(std::move(pair));
    });
  }
  corpus.language = header_lang.value_or(first_lang.value_or(std::string(kUndetermined)));
  if (corpus.language.empty()) fail(ErrorCode::FormatError, "corpus language tag is empty");
  return corpus;
}

std::string serialize_jsonl(const Corpus& corpus) {
  std::string out;
  ordered_json header;
  header["corpus"]["lang"] = corpus.language;
  out += header.dump();
  out += '\n';
  for (const auto& pair : corpus.labeled) {
    ordered_json record;
    record["tokens"] = pair.disfluent.tokens;
    auto& labels = record["labels"] = ordered_json::array();
    for (Label l : pair.disfluent.labels) labels.push_back(std::string(1, label_char(l)));
    record["fluent"] = pair.fluent;
    record["lang"] = pair.disfluent.language;
    out += record.dump();
    out += '\n';
  }
  for (const auto& sentence : corpus.unlabeled) {
    ordered_json record;
    record["tokens"] = sentence.tokens;
    record["lang"] = sentence.source;
    out += record.dump();
    out += '\n';
  }
  return out;
}

// TSV: optional "# lang=xx" line, then one "token<TAB>label" line per token
// with blank lines between sentences. A block whose lines carry no labels is
// an unlabeled sentence.
Corpus parse_tsv(std::string_view text) {
  Corpus corpus;
  corpus.language = std::string(kUndetermined);

  struct Row {
    std::string token;
    std::optional<std::string> label;
  };
  std::vector<Row> block;
  std::size_t block_start = 0;

  auto flush = [&] {
    if (block.empty()) return;
    const bool labeled = block.front().label.has_value();
    at_line(block_start, [&] {
      Tokens tokens;
      Labels labels;
      for (const auto& row : block) {
        if (row.label.has_value() != labeled) {
          fail(ErrorCode::LengthMismatch, "sentence mixes labeled and unlabeled tokens");
        }
        tokens.push_back(row.token);
        if (labeled) {
          auto label = parse_label(*row.label);
          if (!label) fail(ErrorCode::FormatError, "label must be F or D, got '" + *row.label + "'");
          labels.push_back(*label);
        }
      }
      if (labeled) {
        ParallelPair pair;
        pair.disfluent = {std::move(tokens), std::move(labels), corpus.language};
        pair.disfluent.validate();
        pair.fluent = filter_fluent(pair.disfluent.tokens, pair.disfluent.labels);
        corpus.labeled.push_back(std::move(pair));
      } else {
        validate_tokens(tokens, "tokens");
        corpus.unlabeled.push_back({std::move(tokens), corpus.language});
      }
    });
    block.clear();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool seen_content = false;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.starts_with("# lang=")) {
      if (seen_content) fail_at(ErrorCode::FormatError, line_no, "lang header must precede sentences");
      corpus.language = std::string(line.substr(7));
      if (corpus.language.empty()) fail_at(ErrorCode::FormatError, line_no, "empty lang tag");
      continue;
    }
    seen_content = true;
    if (block.empty()) block_start = line_no;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      block.push_back({std::string(line), std::nullopt});
    } else {
      if (line.find('\t', tab + 1) != std::string_view::npos) {
        fail_at(ErrorCode::FormatError, line_no, "expected token<TAB>label");
      }
      block.push_back({std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))});
    }
  }
  flush();
  return corpus;
}

std::string serialize_tsv(const Corpus& corpus) {
  std::string out = "# lang=" + corpus.language + "\n";
  bool first = true;
  auto separator = [&] {
    if (!first) out += '\n';
    first = false;
  };
  for (const auto& pair : corpus.labeled) {
    separator();
    for (std::size_t i = 0; i < pair.disfluent.tokens.size(); ++i) {
      out += pair.disfluent.tokens[i];
      out += '\t';
      out += label_char(pair.disfluent.labels[i]);
      out += '\n';
    }
  }
  for (const auto& sentence : corpus.unlabeled) {
    separator();
    for (const auto& token : sentence.tokens) {
      out += token;
      out += '\n';
    }
  }
  return out;
}

}  // namespace

char label_char(Label label) { return label == Label::Fluent ? 'F' : 'D'; }

std::optional<Label> parse_label(std::string_view text) {
  if (text == "F") return Label::Fluent;
  if (text == "D") return Label::Disfluent;
  return std::nullopt;
}

std::string_view to_string(DisfluencyType type) {
  switch (type) {
    case DisfluencyType::FilledPause: return "FILLED_PAUSE";
    case DisfluencyType::Interjection: return "INTERJECTION";
    case DisfluencyType::DiscourseMarker: return "DISCOURSE_MARKER";
    case DisfluencyType::RepetitionCorrection: return "REPETITION_CORRECTION";
    case DisfluencyType::FalseStart: return "FALSE_START";
    case DisfluencyType::Edit: return "EDIT";
    case DisfluencyType::Stutter: return "STUTTER";
  }
  return "UNKNOWN";
}

std::optional<DisfluencyType> parse_disfluency_type(std::string_view name) {
  for (auto type : kAllDisfluencyTypes) {
    if (to_string(type) == name) return type;
  }
  return std::nullopt;
}

void TaggedSentence::validate() const {
  if (tokens.size() != labels.size()) {
    fail(ErrorCode::LengthMismatch, std::to_string(tokens.size()) + " tokens but " +
                                        std::to_string(labels.size()) + " labels");
  }
  if (tokens.empty()) fail(ErrorCode::FormatError, "sentence has no tokens");
  validate_tokens(tokens, "tokens");
}

void ParallelPair::validate() const {
  disfluent.validate();
  if (filter_fluent(disfluent.tokens, disfluent.labels) != fluent) {
    fail(ErrorCode::AlignmentError, "fluent side is not the FLUENT-labeled subsequence");
  }
  validate_tokens(fluent, "fluent");
}

void Corpus::validate() const {
  if (language.empty()) fail(ErrorCode::FormatError, "corpus language tag is empty");
  for (const auto& pair : labeled) pair.validate();
  for (const auto& sentence : unlabeled) {
    if (sentence.tokens.empty()) fail(ErrorCode::FormatError, "unlabeled sentence has no tokens");
    validate_tokens(sentence.tokens, "unlabeled");
  }
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& pair : labeled) n += pair.disfluent.tokens.size();
  return n;
}

Tokens filter_fluent(const Tokens& tokens, const Labels& labels) {
  if (tokens.size() != labels.size()) {
    fail(ErrorCode::AlignmentError, std::to_string(tokens.size()) + " tokens but " +
                                        std::to_string(labels.size()) + " labels");
  }
  Tokens out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (labels[i] == Label::Fluent) out.push_back(tokens[i]);
  }
  return out;
}

ParallelPair fluent_pair(Tokens fluent, std::string language) {
  ParallelPair pair;
  pair.disfluent.labels.assign(fluent.size(), Label::Fluent);
  pair.disfluent.tokens = fluent;
  pair.disfluent.language = std::move(language);
  pair.fluent = std::move(fluent);
  return pair;
}

std::optional<CorpusFormat> parse_corpus_format(std::string_view name) {
  if (name == "jsonl" || name == "JSONL") return CorpusFormat::Jsonl;
  if (name == "tsv" || name == "TSV") return CorpusFormat::Tsv;
  return std::nullopt;
}

CorpusFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? CorpusFormat::Tsv : CorpusFormat::Jsonl;
}

Corpus parse_corpus(std::string_view text, CorpusFormat format) {
  return format == CorpusFormat::Jsonl ? parse_jsonl(text) : parse_tsv(text);
}

std::string serialize_corpus(const Corpus& corpus, CorpusFormat format) {
  corpus.validate();
  return format == CorpusFormat::Jsonl ? serialize_jsonl(corpus) : serialize_tsv(corpus);
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_corpus(buffer.str(), format);
  } catch (const Error& e) {
    // Keep the code, prefix the file name.
    std::string what = e.what();
    const auto colon = what.find(": ");
    throw Error(e.code(), path.string() + ": " + what.substr(colon + 2));
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  const std::string text = serialize_corpus(corpus, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, std::size_t n_train, std::uint64_t seed) {
  if (n_train > corpus.labeled.size()) {
    fail(ErrorCode::RangeError, "n_train=" + std::to_string(n_train) + " exceeds " +
                                    std::to_string(corpus.labeled.size()) + " labeled pairs");
  }
  std::vector<std::size_t> order(corpus.labeled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(stream_seed(seed, Stream::Split));
  std::shuffle(order.begin(), order.end(), rng);

  Corpus train;
  Corpus test;
  train.language = test.language = corpus.language;
  train.unlabeled = corpus.unlabeled;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : test).labeled.push_back(corpus.labeled[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

Corpus mix_corpora(const Corpus& labeled_src, const Corpus& unlabeled_src) {
  labeled_src.validate();
  unlabeled_src.validate();
  Corpus mixed;
  mixed.language = labeled_src.language;
  mixed.labeled = labeled_src.labeled;
  mixed.unlabeled = unlabeled_src.unlabeled;
  for (const auto& pair : unlabeled_src.labeled) {
    mixed.unlabeled.push_back({pair.disfluent.tokens, pair.disfluent.language});
  }
  return mixed;
}

}  // namespace disfl
