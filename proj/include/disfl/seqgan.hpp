#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "disfl/autodiff.hpp"
#include "disfl/checkpoint.hpp"
#include "disfl/rng.hpp"

namespace disfl::model {

using tc::Parameter;
using tc::Tensor;
using tc::Var;

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t model_dim = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t max_len = 32;
  std::size_t feedforward_dim = 64;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct GeneratorConfig {
  std::size_t noise_dim = 16;
  std::size_t hidden_dim = 64;

  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

/// The discriminator's shared hidden layer is model_dim wide.
struct ModelConfig {
  EncoderConfig encoder;
  GeneratorConfig generator;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Encoded sentences, `size` blocks of `len` positions laid out row-major.
struct Batch {
  std::size_t size = 0;
  std::size_t len = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
  /// 0 = FLUENT, 1 = DISFLUENT; only meaningful where label_mask is 1.
  std::vector<std::int32_t> labels;
  /// 1 on real tokens of labeled sentences, 0 on padding and on every
  /// token of an unlabeled sentence.
  std::vector<std::uint8_t> label_mask;

  void append(const Batch& other);
  void validate() const;
};

template <class T>
struct HiddenSequence {
  Var<T> states;  // [size*len x d]
  std::vector<std::uint8_t> mask;
  std::size_t size = 0;
  std::size_t len = 0;
};

template <class T>
struct DiscriminatorOutput {
  Var<T> token_logits;  // [size*len x 2], columns (fluent, disfluent)
  Var<T> real_logit;    // [size x 1]
  Var<T> p_real;        // [size x 1]
  Var<T> pooled;        // [size x d]
};

enum class ParamGroup { Encoder, Generator, Discriminator };

/// Encoder, generator and discriminator parameters plus their forward passes.
/// Real and generated sequences go through the same discriminate().
template <class T>
class SeqGan {
 public:
  /// Scaled-normal (std 0.02) weights and embeddings, zero biases,
  /// unit layer-norm gains; deterministic in `seed`.
  SeqGan(const ModelConfig& config, std::uint64_t seed);
  SeqGan(const SeqGan&) = delete;
  SeqGan& operator=(const SeqGan&) = delete;
  SeqGan(SeqGan&&) noexcept = default;
  SeqGan& operator=(SeqGan&&) noexcept = default;

  const ModelConfig& config() const { return config_; }

  HiddenSequence<T> encode(const Batch& batch) const;
  /// `noise` is [n x noise_dim]; yields n sequences of max_len positions
  /// with an all-ones mask.
  HiddenSequence<T> generate(const Tensor<T>& noise) const;
  DiscriminatorOutput<T> discriminate(const HiddenSequence<T>& hidden) const;

  std::vector<Parameter<T>> params(ParamGroup group) const;
  std::vector<Parameter<T>> params() const { return params_; }
  const Parameter<T>& param(const std::string& name) const;
  std::size_t parameter_count() const;

  std::vector<tc::NamedTensor> to_named_tensors() const;
  /// Copies values in; names and shapes must match exactly.
  void load_named_tensors(const std::vector<tc::NamedTensor>& tensors);
  /// Deep copy of the parameter values (new storage).
  SeqGan clone() const;

  template <class U>
  SeqGan<U> cast() const {
    SeqGan<U> out(config_, 0);
    auto dst = out.params();
    for (std::size_t i = 0; i < params_.size(); ++i) dst[i].mutable_value() = params_[i].value().template cast<U>();
    return out;
  }

 private:
  struct Index {
    std::size_t tok_emb = 0, pos_emb = 0, emb_ln = 0;
    struct Layer {
      std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1_gain, ln1_bias, ff1_w, ff1_b, ff2_w, ff2_b, ln2_gain, ln2_bias;
    };
    std::vector<Layer> layers;
    std::size_t gen_fc1_w = 0, gen_fc1_b = 0, gen_fc2_w = 0, gen_fc2_b = 0;
    std::size_t disc_hidden_w = 0, disc_hidden_b = 0, disc_token_w = 0, disc_token_b = 0, disc_rf_w = 0,
                disc_rf_b = 0;
  };

  const Var<T>& p(std::size_t i) const { return params_[i].var; }

  ModelConfig config_;
  std::vector<Parameter<T>> params_;
  std::vector<ParamGroup> groups_;
  Index index_;
};

/// Standard-normal noise block [n x noise_dim].
template <class T>
Tensor<T> sample_noise(Rng& rng, std::size_t n, std::size_t noise_dim);

}  // namespace disfl::model
