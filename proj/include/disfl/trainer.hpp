#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "disfl/corpus.hpp"
#include "disfl/evaluate.hpp"
#include "disfl/optim.hpp"
#include "disfl/seqgan.hpp"
#include "disfl/textnorm.hpp"

namespace disfl {

enum class TrainMode { Supervised, Adversarial, AdversarialUnlabeled };

std::string_view to_string(TrainMode mode);
/// "supervised", "adversarial" or "adversarial+unlabeled"; CONFIG_ERROR otherwise.
TrainMode parse_train_mode(std::string_view text);

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size_labeled = 16;
  std::size_t batch_size_unlabeled = 16;
  double lr_d = 1e-3;
  double lr_g = 1e-3;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::AdversarialUnlabeled;
  /// 0 disables periodic evaluation.
  std::size_t eval_every = 100;
  double feature_match_weight = 1.0;

  bool unlabeled_enabled() const { return mode == TrainMode::AdversarialUnlabeled; }
  bool adversarial() const { return mode != TrainMode::Supervised; }
  void validate() const;
};

/// One step's loss terms. Terms unused by the mode are 0.
struct LossReport {
  double l_sup = 0.0;
  double l_unsup_real = 0.0;
  double l_unsup_fake = 0.0;
  double l_d_total = 0.0;
  double l_g_fool = 0.0;
  double l_g_fm = 0.0;
  double l_g_total = 0.0;

  bool operator==(const LossReport&) const = default;
};

template <class T>
struct DiscriminatorLoss {
  tc::Var<T> sup;
  tc::Var<T> unsup_real;
  tc::Var<T> unsup_fake;
  tc::Var<T> total;
  /// Encoder output for the real sentences (labeled first, then unlabeled).
  model::HiddenSequence<T> real;
};

template <class T>
struct GeneratorLoss {
  tc::Var<T> fool;
  tc::Var<T> feature_match;
  tc::Var<T> total;
};

/// Masked mean token cross-entropy over positions with label_mask 1.
template <class T>
tc::Var<T> token_loss(const model::DiscriminatorOutput<T>& out, const model::Batch& batch);

/// Supervised token loss on `labeled` plus real/fake losses on
/// labeled+unlabeled real sentences and on the generated sequences from
/// `noise`. `unlabeled` may be empty. An empty `noise` (0 rows) skips the
/// fake term and the real/fake head entirely (supervised mode).
/// EMPTY_BATCH when `labeled` is empty.
template <class T>
DiscriminatorLoss<T> d_loss(const model::SeqGan<T>& model, const model::Batch& labeled,
                            const model::Batch& unlabeled, const tc::Tensor<T>& noise);

/// Non-saturating fool loss on generated sequences plus weighted squared
/// distance between mean pooled features of real and generated sequences.
/// Real features are treated as constants. EMPTY_BATCH on empty inputs.
template <class T>
GeneratorLoss<T> g_loss(const model::SeqGan<T>& model, const tc::Tensor<T>& noise,
                        const model::HiddenSequence<T>& real, T feature_match_weight);

struct HistoryEntry {
  std::size_t step = 0;
  LossReport loss;
  /// NaN when no evaluation ran at this step.
  double eval_f1 = std::numeric_limits<double>::quiet_NaN();
};

std::string history_csv(const std::vector<HistoryEntry>& history);

/// Holds the model, both optimizers and the batch streams.
class Trainer {
 public:
  Trainer(const model::ModelConfig& model_config, const TrainConfig& config, std::vector<model::Batch> labeled,
          std::vector<model::Batch> unlabeled);

  /// One discriminator update then (adversarial modes) one generator update.
  /// NUMERIC_ERROR names the step.
  LossReport step();

  /// The two halves of step(), exposed for isolation checks. The generator
  /// update reuses the real sentences of the preceding discriminator update.
  LossReport update_discriminator();
  void update_generator(LossReport& report);

  std::size_t steps_done() const { return step_; }
  const TrainConfig& config() const { return config_; }
  const model::SeqGan<float>& model() const { return model_; }
  model::SeqGan<float>& model() { return model_; }

 private:
  model::Batch next_labeled();
  model::Batch next_unlabeled();

  TrainConfig config_;
  model::SeqGan<float> model_;
  tc::Adam<float> opt_d_;
  tc::Adam<float> opt_g_;
  std::vector<model::Batch> labeled_;
  std::vector<model::Batch> unlabeled_;
  std::vector<std::size_t> labeled_order_;
  std::vector<std::size_t> unlabeled_order_;
  std::size_t labeled_pos_ = 0;
  std::size_t unlabeled_pos_ = 0;
  Rng labeled_rng_;
  Rng unlabeled_rng_;
  Rng noise_rng_;
  std::size_t step_ = 0;
  std::optional<model::HiddenSequence<float>> last_real_;
};

struct TrainOutputs {
  /// Final checkpoint; "<stem>.best" and "<stem>.last" siblings are written
  /// next to it. Empty disables checkpointing.
  std::filesystem::path checkpoint;
  /// History CSV; empty disables it.
  std::filesystem::path history;
};

struct TrainResult {
  model::SeqGan<float> final_model;
  /// Best held-out F1 snapshot; equals the final model without a held-out set.
  model::SeqGan<float> best_model;
  double best_f1 = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_step = 0;
  std::vector<HistoryEntry> history;
};

/// Labeled pairs of `mixed` feed the supervised loss, its unlabeled
/// sentences the real/fake task. Evaluates on `heldout` (if non-empty) every
/// eval_every steps and keeps the best-F1 model.
TrainResult train(const Corpus& mixed, const Vocabulary& vocab, const model::ModelConfig& model_config,
                  const TrainConfig& config, const Corpus& heldout = {}, const TrainOutputs& outputs = {},
                  const std::function<void(const HistoryEntry&)>& on_step = {});

std::filesystem::path sibling_checkpoint(const std::filesystem::path& checkpoint, std::string_view tag);

}  // namespace disfl
