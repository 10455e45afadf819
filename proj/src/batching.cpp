#include "disfl/batching.hpp"

namespace disfl {

model::Batch encode_unlabeled(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len) {
  EncodedSentence enc = encode(tokens, vocab, max_len);
  model::Batch batch;
  batch.size = 1;
  batch.len = max_len;
  batch.ids = std::move(enc.ids);
  batch.mask = std::move(enc.mask);
  batch.labels.assign(max_len, 0);
  batch.label_mask.assign(max_len, 0);
  return batch;
}

model::Batch encode_labeled(const TaggedSentence& sentence, const Vocabulary& vocab, std::size_t max_len) {
  model::Batch batch = encode_unlabeled(sentence.tokens, vocab, max_len);
  const std::size_t n = std::min(sentence.labels.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) {
    batch.labels[i] = sentence.labels[i] == Label::Disfluent ? 1 : 0;
    batch.label_mask[i] = 1;
  }
  return batch;
}

model::Batch gather(std::span<const model::Batch> examples, std::span<const std::size_t> indices) {
  model::Batch out;
  for (std::size_t i : indices) out.append(examples[i]);
  return out;
}

}  // namespace disfl
