#include "disfl/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "disfl/artifact.hpp"
#include "disfl/batching.hpp"
#include "disfl/checkpoint.hpp"
#include "disfl/errors.hpp"
#include "disfl/ops.hpp"

namespace disfl {

using model::Batch;
using model::HiddenSequence;
using model::SeqGan;
using tc::Tensor;
using tc::Var;

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Supervised: return "supervised";
    case TrainMode::Adversarial: return "adversarial";
    case TrainMode::AdversarialUnlabeled: return "adversarial+unlabeled";
  }
  return "unknown";
}

TrainMode parse_train_mode(std::string_view text) {
  for (auto mode : {TrainMode::Supervised, TrainMode::Adversarial, TrainMode::AdversarialUnlabeled}) {
    if (text == to_string(mode)) return mode;
  }
  fail(ErrorCode::ConfigError,
       "unknown mode '" + std::string(text) + "' (expected supervised, adversarial or adversarial+unlabeled)");
}

void TrainConfig::validate() const {
  if (steps == 0 || batch_size_labeled == 0 || batch_size_unlabeled == 0) {
    fail(ErrorCode::ConfigError, "steps and batch sizes must be positive");
  }
  if (!(lr_d > 0.0) || !(lr_g > 0.0)) fail(ErrorCode::ConfigError, "learning rates must be positive");
  if (!(feature_match_weight >= 0.0) || !std::isfinite(feature_match_weight)) {
    fail(ErrorCode::ConfigError, "feature_match_weight must be finite and non-negative");
  }
}

template <class T>
Var<T> token_loss(const model::DiscriminatorOutput<T>& out, const Batch& batch) {
  return tc::cross_entropy(out.token_logits, std::span<const std::int32_t>(batch.labels),
                           std::span<const std::uint8_t>(batch.label_mask));
}

template <class T>
DiscriminatorLoss<T> d_loss(const SeqGan<T>& model, const Batch& labeled, const Batch& unlabeled,
                            const Tensor<T>& noise) {
  if (labeled.size == 0) fail(ErrorCode::EmptyBatch, "discriminator loss needs at least one labeled sentence");
  Batch real = labeled;
  real.append(unlabeled);

  DiscriminatorLoss<T> out;
  out.real = model.encode(real);
  const auto disc = model.discriminate(out.real);
  out.sup = token_loss(disc, real);
  if (noise.size() == 0) {
    out.unsup_real = Var<T>::constant(Tensor<T>());
    out.unsup_fake = Var<T>::constant(Tensor<T>());
    out.total = out.sup;
    return out;
  }
  const std::vector<T> ones(real.size, T{1});
  out.unsup_real = tc::binary_cross_entropy_with_logits(disc.real_logit, std::span<const T>(ones));
  const auto fake = model.discriminate(model.generate(noise));
  const std::vector<T> zeros(noise.dim(0), T{0});
  out.unsup_fake = tc::binary_cross_entropy_with_logits(fake.real_logit, std::span<const T>(zeros));
  out.total = tc::add(tc::add(out.sup, out.unsup_real), out.unsup_fake);
  return out;
}

template <class T>
GeneratorLoss<T> g_loss(const SeqGan<T>& model, const Tensor<T>& noise, const HiddenSequence<T>& real,
                        T feature_match_weight) {
  if (noise.size() == 0 || real.size == 0) fail(ErrorCode::EmptyBatch, "generator loss needs real and fake sequences");
  Tensor<T> real_mean;
  {
    tc::NoGradGuard no_grad;
    HiddenSequence<T> detached = real;
    detached.states = Var<T>::constant(real.states.value());
    real_mean = tc::mean_rows(model.discriminate(detached).pooled).value();
  }
  const auto fake = model.discriminate(model.generate(noise));
  GeneratorLoss<T> out;
  const std::vector<T> ones(noise.dim(0), T{1});
  out.fool = tc::binary_cross_entropy_with_logits(fake.real_logit, std::span<const T>(ones));
  out.feature_match = tc::l2_squared(tc::sub(tc::mean_rows(fake.pooled), Var<T>::constant(real_mean)));
  out.total = tc::add(out.fool, tc::scale(out.feature_match, feature_match_weight));
  return out;
}

namespace {

std::vector<tc::Parameter<float>> discriminator_side(const SeqGan<float>& model) {
  auto params = model.params(model::ParamGroup::Encoder);
  const auto disc = model.params(model::ParamGroup::Discriminator);
  params.insert(params.end(), disc.begin(), disc.end());
  return params;
}

tc::AdamConfig adam(double lr) {
  tc::AdamConfig cfg;
  cfg.lr = lr;
  return cfg;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// Takes the next `want` indices from a shuffled order, reshuffling (new
// epoch) when fewer remain. Datasets smaller than `want` are used whole.
std::vector<std::size_t> draw(std::vector<std::size_t>& order, std::size_t& pos, std::size_t want, Rng& rng) {
  want = std::min(want, order.size());
  if (pos == 0 || pos + want > order.size()) {
    std::shuffle(order.begin(), order.end(), rng);
    pos = 0;
  }
  std::vector<std::size_t> out(order.begin() + static_cast<std::ptrdiff_t>(pos),
                               order.begin() + static_cast<std::ptrdiff_t>(pos + want));
  pos += want;
  return out;
}

std::size_t longest_sentence(const Batch& batch) {
  std::size_t longest = 1;
  for (std::size_t s = 0; s < batch.size; ++s) {
    for (std::size_t i = 0; i < batch.len; ++i) {
      if (batch.mask[s * batch.len + i]) longest = std::max(longest, i + 1);
    }
  }
  return longest;
}

// Drops trailing padding columns beyond `len`.
Batch trim(const Batch& batch, std::size_t len) {
  if (batch.size == 0 || len == batch.len) return batch;
  Batch out;
  out.size = batch.size;
  out.len = len;
  auto take = [&](const auto& src, auto& dst) {
    for (std::size_t s = 0; s < batch.size; ++s) {
      const auto from = src.begin() + static_cast<std::ptrdiff_t>(s * batch.len);
      dst.insert(dst.end(), from, from + static_cast<std::ptrdiff_t>(len));
    }
  };
  take(batch.ids, out.ids);
  take(batch.mask, out.mask);
  take(batch.labels, out.labels);
  take(batch.label_mask, out.label_mask);
  return out;
}

}  // namespace

Trainer::Trainer(const model::ModelConfig& model_config, const TrainConfig& config, std::vector<Batch> labeled,
                 std::vector<Batch> unlabeled)
    : config_(config),
      model_(model_config, config.seed),
      opt_d_(discriminator_side(model_), adam(config.lr_d)),
      opt_g_(model_.params(model::ParamGroup::Generator), adam(config.lr_g)),
      labeled_(std::move(labeled)),
      unlabeled_(std::move(unlabeled)),
      labeled_order_(iota(labeled_.size())),
      unlabeled_order_(iota(unlabeled_.size())),
      labeled_rng_(split_seed(stream_seed(config.seed, Stream::Batching), 0)),
      unlabeled_rng_(split_seed(stream_seed(config.seed, Stream::Batching), 1)),
      noise_rng_(stream_seed(config.seed, Stream::Noise)) {
  config_.validate();
  if (labeled_.empty()) fail(ErrorCode::EmptyBatch, "training needs at least one labeled sentence");
}

Batch Trainer::next_labeled() {
  const auto idx = draw(labeled_order_, labeled_pos_, config_.batch_size_labeled, labeled_rng_);
  return gather(labeled_, idx);
}

Batch Trainer::next_unlabeled() {
  if (!config_.unlabeled_enabled() || unlabeled_.empty()) return {};
  const auto idx = draw(unlabeled_order_, unlabeled_pos_, config_.batch_size_unlabeled, unlabeled_rng_);
  return gather(unlabeled_, idx);
}

LossReport Trainer::update_discriminator() {
  const Batch labeled = next_labeled();
  const Batch unlabeled = next_unlabeled();
  // Both parts share one trimmed length so they concatenate cleanly.
  std::size_t len = longest_sentence(labeled);
  if (unlabeled.size > 0) len = std::max(len, longest_sentence(unlabeled));
  const Batch lab_part = trim(labeled, len);
  const Batch unl_part = trim(unlabeled, len);

  const std::size_t z = model_.config().generator.noise_dim;
  const Tensor<float> noise = config_.adversarial()
                                  ? model::sample_noise<float>(noise_rng_, lab_part.size + unl_part.size, z)
                                  : Tensor<float>({0, z});
  LossReport report;
  opt_d_.zero_grad();
  opt_g_.zero_grad();
  auto d = d_loss(model_, lab_part, unl_part, noise);
  report.l_sup = d.sup.value().item();
  if (config_.adversarial()) {
    report.l_unsup_real = d.unsup_real.value().item();
    report.l_unsup_fake = d.unsup_fake.value().item();
  }
  report.l_d_total = d.total.value().item();
  d.total.backward();
  opt_d_.step();
  opt_d_.zero_grad();
  opt_g_.zero_grad();
  last_real_ = d.real;
  return report;
}

void Trainer::update_generator(LossReport& report) {
  if (!last_real_) fail(ErrorCode::PreconditionError, "generator update needs a preceding discriminator update");
  const std::size_t z = model_.config().generator.noise_dim;
  const Tensor<float> noise = model::sample_noise<float>(noise_rng_, last_real_->size, z);
  auto g = g_loss(model_, noise, *last_real_, static_cast<float>(config_.feature_match_weight));
  report.l_g_fool = g.fool.value().item();
  report.l_g_fm = g.feature_match.value().item();
  report.l_g_total = g.total.value().item();
  g.total.backward();
  opt_g_.step();
  opt_d_.zero_grad();
  opt_g_.zero_grad();
}

LossReport Trainer::step() {
  try {
    LossReport report = update_discriminator();
    if (config_.adversarial()) update_generator(report);
    last_real_.reset();
    ++step_;
    return report;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NumericError) throw;
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(ErrorCode::NumericError)) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    fail(ErrorCode::NumericError, "step " + std::to_string(step_ + 1) + ": " + msg);
  }
}

std::string history_csv(const std::vector<HistoryEntry>& history) {
  std::string out = "step,l_sup,l_unsup_real,l_unsup_fake,l_d_total,l_g_fool,l_g_fm,l_g_total,eval_f1\n";
  char buf[512];
  for (const auto& h : history) {
    const auto& l = h.loss;
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,", h.step, l.l_sup, l.l_unsup_real,
                  l.l_unsup_fake, l.l_d_total, l.l_g_fool, l.l_g_fm, l.l_g_total);
    out += buf;
    if (!std::isnan(h.eval_f1)) {
      std::snprintf(buf, sizeof(buf), "%.4f", h.eval_f1);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::filesystem::path sibling_checkpoint(const std::filesystem::path& checkpoint, std::string_view tag) {
  auto path = checkpoint;
  path.replace_filename(checkpoint.stem().string() + "." + std::string(tag) + checkpoint.extension().string());
  return path;
}

TrainResult train(const Corpus& mixed, const Vocabulary& vocab, const model::ModelConfig& model_config,
                  const TrainConfig& config, const Corpus& heldout, const TrainOutputs& outputs,
                  const std::function<void(const HistoryEntry&)>& on_step) {
  config.validate();
  if (mixed.labeled.empty()) fail(ErrorCode::EmptyBatch, "training corpus has no labeled sentences");
  const std::size_t max_len = model_config.encoder.max_len;
  std::vector<Batch> labeled, unlabeled;
  for (const auto& pair : mixed.labeled) labeled.push_back(encode_labeled(pair.disfluent, vocab, max_len));
  for (const auto& sentence : mixed.unlabeled) {
    unlabeled.push_back(encode_unlabeled(sentence.tokens, vocab, max_len));
  }

  Trainer trainer(model_config, config, std::move(labeled), std::move(unlabeled));
  const std::string mode(to_string(config.mode));
  std::vector<HistoryEntry> history;
  history.reserve(config.steps);
  std::optional<SeqGan<float>> best;
  double best_f1 = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_step = 0;
  const bool evaluating = config.eval_every > 0 && !heldout.labeled.empty();

  for (std::size_t s = 0; s < config.steps; ++s) {
    HistoryEntry entry;
    entry.step = s + 1;
    entry.loss = trainer.step();
    const bool periodic = config.eval_every > 0 && (entry.step % config.eval_every == 0 || entry.step == config.steps);
    if (evaluating && periodic) {
      entry.eval_f1 = evaluate_corpus(trainer.model(), heldout, vocab).f1;
      if (!best || entry.eval_f1 > best_f1) {
        best = trainer.model().clone();
        best_f1 = entry.eval_f1;
        best_step = entry.step;
        if (!outputs.checkpoint.empty()) {
          save_model(sibling_checkpoint(outputs.checkpoint, "best"), *best, vocab, mode, best_step);
        }
      }
    }
    if (periodic && !outputs.checkpoint.empty()) {
      save_model(sibling_checkpoint(outputs.checkpoint, "last"), trainer.model(), vocab, mode, entry.step);
    }
    history.push_back(entry);
    if (on_step) on_step(entry);
  }

  if (!outputs.checkpoint.empty()) save_model(outputs.checkpoint, trainer.model(), vocab, mode, config.steps);
  if (!outputs.history.empty()) tc::write_file_atomic(outputs.history, history_csv(history));

  TrainResult result{trainer.model().clone(), best ? std::move(*best) : trainer.model().clone(), best_f1, best_step,
                     std::move(history)};
  return result;
}

template Var<float> token_loss(const model::DiscriminatorOutput<float>&, const Batch&);
template Var<double> token_loss(const model::DiscriminatorOutput<double>&, const Batch&);
template DiscriminatorLoss<float> d_loss(const SeqGan<float>&, const Batch&, const Batch&, const Tensor<float>&);
template DiscriminatorLoss<double> d_loss(const SeqGan<double>&, const Batch&, const Batch&, const Tensor<double>&);
template GeneratorLoss<float> g_loss(const SeqGan<float>&, const Tensor<float>&, const HiddenSequence<float>&, float);
template GeneratorLoss<double> g_loss(const SeqGan<double>&, const Tensor<double>&, const HiddenSequence<double>&,
                                      double);

}  // namespace disfl
