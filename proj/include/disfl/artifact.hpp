#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "disfl/seqgan.hpp"
#include "disfl/textnorm.hpp"

namespace disfl {

/// Sidecar metadata stored next to a checkpoint as `<checkpoint>.json`.
struct ModelMetadata {
  model::ModelConfig config;
  std::uint64_t vocab_fingerprint = 0;
  std::size_t vocab_size = 0;
  std::string mode;
  std::uint64_t step = 0;

  std::string to_json() const;
  static ModelMetadata from_json(std::string_view text);
};

struct LoadedModel {
  model::SeqGan<float> model;
  ModelMetadata metadata;
};

std::filesystem::path metadata_path(const std::filesystem::path& checkpoint);

/// Writes the checkpoint and its sidecar, each via write-then-rename.
void save_model(const std::filesystem::path& checkpoint, const model::SeqGan<float>& model,
                const Vocabulary& vocab, const std::string& mode = "", std::uint64_t step = 0);
LoadedModel load_model(const std::filesystem::path& checkpoint);

/// VOCAB_MISMATCH unless `vocab` is the vocabulary the model was trained with.
void require_vocab(const ModelMetadata& metadata, const Vocabulary& vocab);

}  // namespace disfl
