#include "disfl/textnorm.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "disfl/errors.hpp"

namespace disfl {

namespace {

void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  std::int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<std::uint8_t*>(buf), len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace

Tokens normalize(std::string_view text) {
  Tokens tokens;
  std::string current;
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto len = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < len) {
    UChar32 c = 0;
    U8_NEXT(bytes, i, len, c);
    if (c < 0) c = 0xFFFD;
    if (u_isUWhiteSpace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (u_ispunct(c)) continue;
    append_utf8(current, u_tolower(c));
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary::Vocabulary() : id_to_token_{std::string(kPadToken), std::string(kUnkToken)} {}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens, std::size_t min_freq) {
  Vocabulary vocab;
  vocab.min_freq_ = min_freq;
  for (const auto& token : tokens) {
    const auto id = static_cast<std::int32_t>(vocab.id_to_token_.size());
    if (!vocab.token_to_id_.emplace(token, id).second) {
      fail(ErrorCode::FormatError, "duplicate vocabulary entry '" + token + "'");
    }
    vocab.id_to_token_.push_back(token);
  }
  return vocab;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    fail(ErrorCode::RangeError, "token id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.contains(std::string(token));
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](unsigned char byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (const auto& token : id_to_token_) {
    for (unsigned char c : token) feed(c);
    feed(0);
  }
  return h;
}

std::string Vocabulary::serialize() const {
  std::string out = "V " + std::to_string(size()) + " PAD " + std::to_string(kPad) + " UNK " +
                    std::to_string(kUnk) + "\n";
  for (const auto& token : id_to_token_) {
    out += token;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string v_key, pad_key, unk_key;
  std::size_t v = 0;
  std::int32_t pad = -1, unk = -1;
  if (!(hs >> v_key >> v >> pad_key >> pad >> unk_key >> unk) || v_key != "V" || pad_key != "PAD" ||
      unk_key != "UNK") {
    fail(ErrorCode::FormatError, "vocabulary header must be 'V <n> PAD <id> UNK <id>'");
  }
  if (pad != kPad || unk != kUnk || v < 2) {
    fail(ErrorCode::FormatError, "vocabulary must reserve PAD=0 and UNK=1");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() != v) {
    fail(ErrorCode::FormatError, "vocabulary declares " + std::to_string(v) + " entries, found " +
                                     std::to_string(lines.size()));
  }
  return from_tokens({lines.begin() + 2, lines.end()});
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << serialize();
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

Vocabulary build_vocab(std::span<const Corpus> corpora, std::size_t min_freq) {
  if (min_freq < 1) fail(ErrorCode::RangeError, "min_freq must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& corpus : corpora) {
    for (const auto& pair : corpus.labeled) {
      for (const auto& token : pair.disfluent.tokens) ++counts[token];
    }
    for (const auto& sentence : corpus.unlabeled) {
      for (const auto& token : sentence.tokens) ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, count] : counts) {
    if (count >= min_freq) kept.emplace_back(token, count);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [token, _] : kept) tokens.push_back(std::move(token));
  return Vocabulary::from_tokens(tokens, min_freq);
}

std::size_t EncodedSentence::real_length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

EncodedSentence encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) fail(ErrorCode::RangeError, "max_len must be >= 1");
  EncodedSentence out;
  out.ids.assign(max_len, Vocabulary::kPad);
  out.mask.assign(max_len, 0);
  out.source_length = tokens.size();
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) {
    out.ids[i] = vocab.id(tokens[i]);
    out.mask[i] = 1;
  }
  return out;
}

}  // namespace disfl
