#include "disfl/artifact.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "disfl/checkpoint.hpp"
#include "disfl/errors.hpp"

namespace disfl {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string ModelMetadata::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "disfl-model";
  j["version"] = 1;
  const auto& e = config.encoder;
  j["encoder"] = {{"vocab_size", e.vocab_size},   {"model_dim", e.model_dim}, {"n_layers", e.n_layers},
                  {"n_heads", e.n_heads},         {"max_len", e.max_len},     {"feedforward_dim", e.feedforward_dim}};
  j["generator"] = {{"noise_dim", config.generator.noise_dim}, {"hidden_dim", config.generator.hidden_dim}};
  j["vocab_fingerprint"] = hex64(vocab_fingerprint);
  j["vocab_size"] = vocab_size;
  j["mode"] = mode;
  j["step"] = step;
  return j.dump(2) + "\n";
}

ModelMetadata ModelMetadata::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "disfl-model") fail(ErrorCode::FormatError, "not model metadata");
    ModelMetadata m;
    const auto& e = j.at("encoder");
    m.config.encoder = {e.at("vocab_size").get<std::size_t>(), e.at("model_dim").get<std::size_t>(),
                        e.at("n_layers").get<std::size_t>(),   e.at("n_heads").get<std::size_t>(),
                        e.at("max_len").get<std::size_t>(),    e.at("feedforward_dim").get<std::size_t>()};
    const auto& g = j.at("generator");
    m.config.generator = {g.at("noise_dim").get<std::size_t>(), g.at("hidden_dim").get<std::size_t>()};
    m.vocab_fingerprint = std::stoull(j.at("vocab_fingerprint").get<std::string>(), nullptr, 16);
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.mode = j.value("mode", "");
    m.step = j.value("step", std::uint64_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("bad model metadata: ") + e.what());
  }
}

std::filesystem::path metadata_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

void save_model(const std::filesystem::path& checkpoint, const model::SeqGan<float>& model, const Vocabulary& vocab,
                const std::string& mode, std::uint64_t step) {
  ModelMetadata meta{model.config(), vocab.fingerprint(), vocab.size(), mode, step};
  tc::save_checkpoint(checkpoint, model.to_named_tensors());
  tc::write_file_atomic(metadata_path(checkpoint), meta.to_json());
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  ModelMetadata meta = ModelMetadata::from_json(tc::read_file(metadata_path(checkpoint)));
  model::SeqGan<float> model(meta.config, 0);
  model.load_named_tensors(tc::load_checkpoint(checkpoint));
  return {std::move(model), std::move(meta)};
}

void require_vocab(const ModelMetadata& metadata, const Vocabulary& vocab) {
  if (metadata.vocab_fingerprint != vocab.fingerprint() || metadata.vocab_size != vocab.size()) {
    fail(ErrorCode::VocabMismatch, "model was trained with vocabulary " + hex64(metadata.vocab_fingerprint) + " (" +
                                       std::to_string(metadata.vocab_size) + " entries), got " +
                                       hex64(vocab.fingerprint()) + " (" + std::to_string(vocab.size()) + ")");
  }
}

}  // namespace disfl
