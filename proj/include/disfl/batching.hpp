#pragma once

#include <span>

#include "disfl/corpus.hpp"
#include "disfl/seqgan.hpp"
#include "disfl/textnorm.hpp"

namespace disfl {

/// One-sentence batch padded/truncated to `max_len`; labels truncated with the tokens.
model::Batch encode_labeled(const TaggedSentence& sentence, const Vocabulary& vocab, std::size_t max_len);
model::Batch encode_unlabeled(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len);

/// Concatenation of the selected one-sentence batches.
model::Batch gather(std::span<const model::Batch> examples, std::span<const std::size_t> indices);

}  // namespace disfl
