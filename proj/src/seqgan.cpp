#include "disfl/seqgan.hpp"

#include <algorithm>

#include "disfl/errors.hpp"
#include "disfl/ops.hpp"

namespace disfl::model {

using tc::Shape;

void EncoderConfig::validate() const {
  if (vocab_size < 2 || model_dim == 0 || n_layers == 0 || n_heads == 0 || max_len == 0 || feedforward_dim == 0) {
    fail(ErrorCode::ConfigError, "encoder sizes must be positive and the vocabulary must hold PAD and UNK");
  }
  if (model_dim % n_heads != 0) {
    fail(ErrorCode::ConfigError, "model_dim " + std::to_string(model_dim) + " is not divisible by n_heads " +
                                     std::to_string(n_heads));
  }
}

void GeneratorConfig::validate() const {
  if (noise_dim == 0 || hidden_dim == 0) fail(ErrorCode::ConfigError, "generator sizes must be positive");
}

void ModelConfig::validate() const {
  encoder.validate();
  generator.validate();
}

void Batch::validate() const {
  const std::size_t n = size * len;
  if (ids.size() != n || mask.size() != n || labels.size() != n || label_mask.size() != n) {
    fail(ErrorCode::ShapeError, "batch arrays must hold size*len = " + std::to_string(n) + " entries");
  }
}

void Batch::append(const Batch& other) {
  if (other.size == 0) return;
  if (size == 0) {
    *this = other;
    return;
  }
  if (other.len != len) fail(ErrorCode::ShapeError, "cannot append batches of different lengths");
  size += other.size;
  ids.insert(ids.end(), other.ids.begin(), other.ids.end());
  mask.insert(mask.end(), other.mask.begin(), other.mask.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  label_mask.insert(label_mask.end(), other.label_mask.begin(), other.label_mask.end());
}

template <class T>
Tensor<T> sample_noise(Rng& rng, std::size_t n, std::size_t noise_dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<T> z({n, noise_dim});
  for (auto& v : z.values()) v = static_cast<T>(normal(rng));
  return z;
}

template <class T>
SeqGan<T>::SeqGan(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const auto& e = config_.encoder;
  const auto& g = config_.generator;
  const std::size_t d = e.model_dim;

  Rng rng(stream_seed(seed, Stream::Init));
  std::normal_distribution<double> normal(0.0, 0.02);

  auto add = [&](std::string name, Shape shape, ParamGroup group, char kind) {
    Tensor<T> value(shape);
    if (kind == 'n') {
      for (auto& v : value.values()) v = static_cast<T>(normal(rng));
    } else if (kind == '1') {
      value.fill(T(1));
    }
    params_.push_back(tc::make_parameter(std::move(name), std::move(value)));
    groups_.push_back(group);
    return params_.size() - 1;
  };
  const auto enc = ParamGroup::Encoder;
  index_.tok_emb = add("enc.tok_emb", {e.vocab_size, d}, enc, 'n');
  index_.pos_emb = add("enc.pos_emb", {e.max_len, d}, enc, 'n');
  index_.emb_ln = add("enc.emb_ln.gain", {d}, enc, '1');
  add("enc.emb_ln.bias", {d}, enc, '0');
  for (std::size_t l = 0; l < e.n_layers; ++l) {
    const std::string pre = "enc.layer" + std::to_string(l) + ".";
    typename Index::Layer layer{};
    layer.wq = add(pre + "attn.wq", {d, d}, enc, 'n');
    layer.bq = add(pre + "attn.bq", {d}, enc, '0');
    layer.wk = add(pre + "attn.wk", {d, d}, enc, 'n');
    layer.bk = add(pre + "attn.bk", {d}, enc, '0');
    layer.wv = add(pre + "attn.wv", {d, d}, enc, 'n');
    layer.bv = add(pre + "attn.bv", {d}, enc, '0');
    layer.wo = add(pre + "attn.wo", {d, d}, enc, 'n');
    layer.bo = add(pre + "attn.bo", {d}, enc, '0');
    layer.ln1_gain = add(pre + "ln1.gain", {d}, enc, '1');
    layer.ln1_bias = add(pre + "ln1.bias", {d}, enc, '0');
    layer.ff1_w = add(pre + "ff1.w", {d, e.feedforward_dim}, enc, 'n');
    layer.ff1_b = add(pre + "ff1.b", {e.feedforward_dim}, enc, '0');
    layer.ff2_w = add(pre + "ff2.w", {e.feedforward_dim, d}, enc, 'n');
    layer.ff2_b = add(pre + "ff2.b", {d}, enc, '0');
    layer.ln2_gain = add(pre + "ln2.gain", {d}, enc, '1');
    layer.ln2_bias = add(pre + "ln2.bias", {d}, enc, '0');
    index_.layers.push_back(layer);
  }
  const auto gen = ParamGroup::Generator;
  index_.gen_fc1_w = add("gen.fc1.w", {g.noise_dim, g.hidden_dim}, gen, 'n');
  index_.gen_fc1_b = add("gen.fc1.b", {g.hidden_dim}, gen, '0');
  index_.gen_fc2_w = add("gen.fc2.w", {g.hidden_dim, e.max_len * d}, gen, 'n');
  index_.gen_fc2_b = add("gen.fc2.b", {e.max_len * d}, gen, '0');
  const auto disc = ParamGroup::Discriminator;
  index_.disc_hidden_w = add("disc.hidden.w", {d, d}, disc, 'n');
  index_.disc_hidden_b = add("disc.hidden.b", {d}, disc, '0');
  index_.disc_token_w = add("disc.token.w", {d, 2}, disc, 'n');
  index_.disc_token_b = add("disc.token.b", {2}, disc, '0');
  index_.disc_rf_w = add("disc.rf.w", {d, 1}, disc, 'n');
  index_.disc_rf_b = add("disc.rf.b", {1}, disc, '0');
}

template <class T>
HiddenSequence<T> SeqGan<T>::encode(const Batch& batch) const {
  batch.validate();
  const auto& e = config_.encoder;
  if (batch.len == 0 || batch.len > e.max_len) {
    fail(ErrorCode::ShapeError, "batch length " + std::to_string(batch.len) + " outside 1.." +
                                    std::to_string(e.max_len));
  }
  if (batch.size == 0) fail(ErrorCode::ShapeError, "cannot encode an empty batch");
  std::vector<std::int32_t> positions(batch.size * batch.len);
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<std::int32_t>(i % batch.len);

  Var<T> x = tc::add(tc::embedding_lookup(p(index_.tok_emb), std::span<const std::int32_t>(batch.ids)),
                     tc::embedding_lookup(p(index_.pos_emb), std::span<const std::int32_t>(positions)));
  x = tc::layer_norm(x, p(index_.emb_ln), p(index_.emb_ln + 1));
  auto linear = [&](const Var<T>& in, std::size_t w, std::size_t b) {
    return tc::add_row(tc::matmul(in, p(w)), p(b));
  };
  for (const auto& layer : index_.layers) {
    const Var<T> q = linear(x, layer.wq, layer.bq);
    const Var<T> k = linear(x, layer.wk, layer.bk);
    const Var<T> v = linear(x, layer.wv, layer.bv);
    const Var<T> attended = tc::multi_head_attention(q, k, v, std::span<const std::uint8_t>(batch.mask),
                                                     batch.size, e.n_heads);
    x = tc::layer_norm(tc::add(x, linear(attended, layer.wo, layer.bo)), p(layer.ln1_gain), p(layer.ln1_bias));
    const Var<T> ff = linear(tc::gelu(linear(x, layer.ff1_w, layer.ff1_b)), layer.ff2_w, layer.ff2_b);
    x = tc::layer_norm(tc::add(x, ff), p(layer.ln2_gain), p(layer.ln2_bias));
  }
  return {x, batch.mask, batch.size, batch.len};
}

template <class T>
HiddenSequence<T> SeqGan<T>::generate(const Tensor<T>& noise) const {
  const auto& e = config_.encoder;
  const auto& g = config_.generator;
  if (noise.rank() != 2 || noise.dim(1) != g.noise_dim || noise.dim(0) == 0) {
    fail(ErrorCode::ShapeError, "noise must be [n x " + std::to_string(g.noise_dim) + "], got " +
                                    tc::shape_string(noise.shape()));
  }
  const std::size_t n = noise.dim(0);
  const Var<T> z = Var<T>::constant(noise);
  const Var<T> hidden = tc::gelu(tc::add_row(tc::matmul(z, p(index_.gen_fc1_w)), p(index_.gen_fc1_b)));
  const Var<T> flat = tc::add_row(tc::matmul(hidden, p(index_.gen_fc2_w)), p(index_.gen_fc2_b));
  return {tc::reshape(flat, {n * e.max_len, e.model_dim}), std::vector<std::uint8_t>(n * e.max_len, 1), n,
          e.max_len};
}

template <class T>
DiscriminatorOutput<T> SeqGan<T>::discriminate(const HiddenSequence<T>& hidden) const {
  const std::size_t d = config_.encoder.model_dim;
  if (hidden.states.value().rank() != 2 || hidden.states.shape()[1] != d ||
      hidden.states.shape()[0] != hidden.size * hidden.len || hidden.mask.size() != hidden.size * hidden.len) {
    fail(ErrorCode::ShapeError, "hidden sequence of shape " + tc::shape_string(hidden.states.shape()) +
                                    " does not match " + std::to_string(hidden.size) + " x " +
                                    std::to_string(hidden.len) + " x " + std::to_string(d));
  }
  const Var<T> shared =
      tc::gelu(tc::add_row(tc::matmul(hidden.states, p(index_.disc_hidden_w)), p(index_.disc_hidden_b)));
  DiscriminatorOutput<T> out;
  out.token_logits = tc::add_row(tc::matmul(shared, p(index_.disc_token_w)), p(index_.disc_token_b));
  out.pooled = tc::mean_pool(shared, std::span<const std::uint8_t>(hidden.mask), hidden.size);
  out.real_logit = tc::add_row(tc::matmul(out.pooled, p(index_.disc_rf_w)), p(index_.disc_rf_b));
  out.p_real = tc::sigmoid(out.real_logit);
  return out;
}

template <class T>
std::vector<Parameter<T>> SeqGan<T>::params(ParamGroup group) const {
  std::vector<Parameter<T>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (groups_[i] == group) out.push_back(params_[i]);
  }
  return out;
}

template <class T>
const Parameter<T>& SeqGan<T>::param(const std::string& name) const {
  for (const auto& prm : params_) {
    if (prm.name == name) return prm;
  }
  fail(ErrorCode::RangeError, "no parameter named '" + name + "'");
}

template <class T>
std::size_t SeqGan<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& prm : params_) n += prm.value().size();
  return n;
}

template <class T>
std::vector<tc::NamedTensor> SeqGan<T>::to_named_tensors() const {
  std::vector<tc::NamedTensor> out;
  for (const auto& prm : params_) out.push_back({prm.name, prm.value().template cast<float>()});
  return out;
}

template <class T>
void SeqGan<T>::load_named_tensors(const std::vector<tc::NamedTensor>& tensors) {
  if (tensors.size() != params_.size()) {
    fail(ErrorCode::FormatError, "checkpoint holds " + std::to_string(tensors.size()) + " tensors, model needs " +
                                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != params_[i].name || tensors[i].value.shape() != params_[i].value().shape()) {
      fail(ErrorCode::FormatError, "checkpoint tensor '" + tensors[i].name + "' " +
                                       tc::shape_string(tensors[i].value.shape()) + " does not match '" +
                                       params_[i].name + "' " + tc::shape_string(params_[i].value().shape()));
    }
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    params_[i].mutable_value() = tensors[i].value.template cast<T>();
  }
}

template <class T>
SeqGan<T> SeqGan<T>::clone() const {
  SeqGan copy(config_, 0);
  for (std::size_t i = 0; i < params_.size(); ++i) copy.params_[i].mutable_value() = params_[i].value();
  return copy;
}

template class SeqGan<float>;
template class SeqGan<double>;
template Tensor<float> sample_noise<float>(Rng&, std::size_t, std::size_t);
template Tensor<double> sample_noise<double>(Rng&, std::size_t, std::size_t);

}  // namespace disfl::model
