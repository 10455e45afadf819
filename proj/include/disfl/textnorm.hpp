#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "disfl/corpus.hpp"

namespace disfl {

/// Drops Unicode punctuation (categories P*), applies simple lower-case
/// mapping and splits on whitespace runs.
Tokens normalize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Ids 2.. in the given order.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, std::size_t min_freq = 1);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return id_to_token_.size(); }
  std::size_t min_freq() const { return min_freq_; }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// FNV-1a over the id-ordered token list; identifies a vocabulary in
  /// checkpoint metadata.
  std::uint64_t fingerprint() const;

  /// Header "V <size> PAD <id> UNK <id>", then one token per line in id order.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::size_t min_freq_ = 1;
};

/// Every token with frequency >= min_freq over labeled and unlabeled
/// sentences, ordered by frequency desc then lexicographically.
Vocabulary build_vocab(std::span<const Corpus> corpora, std::size_t min_freq = 1);

struct EncodedSentence {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  /// Number of tokens before truncation.
  std::size_t source_length = 0;

  bool truncated() const { return source_length > ids.size(); }
  std::size_t real_length() const;
};

EncodedSentence encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len);

}  // namespace disfl
