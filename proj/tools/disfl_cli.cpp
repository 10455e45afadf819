// disfl: synthesize disfluent corpora, train the tagger, evaluate, correct text.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "disfl/artifact.hpp"
#include "disfl/checkpoint.hpp"
#include "disfl/diagnostics.hpp"
#include "disfl/errors.hpp"
#include "disfl/evaluate.hpp"
#include "disfl/run_config.hpp"
#include "disfl/synth.hpp"
#include "disfl/textnorm.hpp"
#include "disfl/trainer.hpp"

namespace fs = std::filesystem;
using namespace disfl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitArtifact = 4;
constexpr int kExitDiagnostic = 5;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NumericError: return kExitNumeric;
    case ErrorCode::VocabMismatch: return kExitArtifact;
    default: return kExitData;
  }
}

std::string flag_name(const std::string& key) {
  std::string dashed = key;
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  return dashed == key ? "--" + key : "--" + dashed + ",--" + key;
}

// Keys exposed as flags on a subcommand; their raw strings are applied after
// the config file so flags win.
struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> raw;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void add_keys(const std::vector<std::string>& keys) {
    for (const auto& key : keys) {
      const ConfigKey* k = find_config_key(key);
      options[key] = app->add_option(flag_name(key), raw[key], k->help);
    }
    app->add_option("--config", config_path, std::string("key=value config file (default: $") + kConfigEnvVar + ")");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    const fs::path path = resolve_config_path(config_path);
    if (!path.empty()) apply_config_text(cfg, tc::read_file(path));
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) apply_setting(cfg, key, raw.at(key));
    }
    return cfg;
  }
};

void require(const std::string& value, const std::string& key) {
  if (value.empty()) fail(ErrorCode::ConfigError, "missing --" + key);
}

fs::path vocab_path_for(const RunConfig& cfg) {
  return cfg.vocab.empty() ? fs::path(cfg.checkpoint + ".vocab") : fs::path(cfg.vocab);
}

int run_synth(const RunConfig& cfg) {
  require(cfg.input, "in");
  require(cfg.output, "out");
  const Lexicons lex = cfg.lexicon.empty() ? Lexicons::english_default() : Lexicons::load(cfg.lexicon);
  const auto sentences = read_sentences(cfg.input);
  const auto result = synthesize(sentences, cfg.synth, lex, cfg.language, cfg.jobs);
  save_corpus(result.corpus, cfg.output, format_for_path(cfg.output));
  std::printf("sentences=%zu\n", result.corpus.labeled.size());
  std::printf("fluent_tokens=%zu\n", result.stats.fluent_tokens);
  std::printf("disfluent_tokens=%zu\n", result.stats.disfluent_tokens);
  std::printf("disfluent_fraction=%.4f\n", result.stats.disfluent_fraction());
  for (auto type : kAllDisfluencyTypes) {
    std::printf("count.%s=%zu\n", std::string(to_string(type)).c_str(),
                result.stats.type_counts[static_cast<std::size_t>(type)]);
  }
  return kExitOk;
}

int run_train(const RunConfig& cfg) {
  require(cfg.labeled, "labeled");
  require(cfg.checkpoint, "checkpoint");
  const Corpus labeled = load_corpus(cfg.labeled, format_for_path(cfg.labeled));
  Corpus mixed = labeled;
  if (!cfg.unlabeled.empty()) {
    if (cfg.train.mode == TrainMode::Supervised) {
      std::fprintf(stderr, "warning: --mode supervised ignores --unlabeled %s\n", cfg.unlabeled.c_str());
    } else {
      mixed = mix_corpora(labeled, load_corpus(cfg.unlabeled, format_for_path(cfg.unlabeled)));
    }
  }
  if (cfg.train.mode == TrainMode::Supervised) mixed.unlabeled.clear();
  const Corpus heldout = cfg.heldout.empty() ? Corpus{} : load_corpus(cfg.heldout, format_for_path(cfg.heldout));

  const Corpus corpora[] = {mixed};
  const Vocabulary vocab = build_vocab(corpora, cfg.min_freq);
  vocab.save(vocab_path_for(cfg));
  model::ModelConfig model_cfg = cfg.model;
  model_cfg.encoder.vocab_size = vocab.size();

  TrainOutputs outputs{cfg.checkpoint, cfg.history};
  const std::size_t report_every = std::max<std::size_t>(1, cfg.train.steps / 20);
  const auto result = train(mixed, vocab, model_cfg, cfg.train, heldout, outputs, [&](const HistoryEntry& h) {
    if (h.step % report_every == 0 || !std::isnan(h.eval_f1)) {
      std::fprintf(stderr, "step %zu l_d=%.4f l_g=%.4f%s\n", h.step, h.loss.l_d_total, h.loss.l_g_total,
                   std::isnan(h.eval_f1) ? "" : (" heldout_f1=" + std::to_string(h.eval_f1)).c_str());
    }
  });
  std::printf("mode=%s\n", std::string(to_string(cfg.train.mode)).c_str());
  std::printf("labeled=%zu unlabeled=%zu vocab=%zu parameters=%zu\n", mixed.labeled.size(), mixed.unlabeled.size(),
              vocab.size(), result.final_model.parameter_count());
  std::printf("steps=%zu final_l_sup=%.6f\n", result.history.size(), result.history.back().loss.l_sup);
  if (!std::isnan(result.best_f1)) std::printf("best_heldout_f1=%.2f best_step=%zu\n", result.best_f1, result.best_step);
  std::printf("checkpoint=%s\n", cfg.checkpoint.c_str());
  return kExitOk;
}

int run_eval(const RunConfig& cfg) {
  require(cfg.checkpoint, "checkpoint");
  require(cfg.test, "test");
  const LoadedModel loaded = load_model(cfg.checkpoint);
  const Vocabulary vocab = Vocabulary::load(vocab_path_for(cfg));
  require_vocab(loaded.metadata, vocab);
  const Corpus test = load_corpus(cfg.test, format_for_path(cfg.test));
  const MetricReport report = evaluate_corpus(loaded.model, test, vocab, cfg.jobs);
  const std::string text = report.to_key_value();
  std::fputs(text.c_str(), stdout);
  if (!cfg.report.empty()) {
    tc::write_file_atomic(cfg.report + ".txt", text);
    tc::write_file_atomic(cfg.report + ".json", report.to_json());
  }
  return kExitOk;
}

int run_correct(const RunConfig& cfg, const std::string& text) {
  require(cfg.checkpoint, "checkpoint");
  if (cfg.input.empty() && text.empty()) fail(ErrorCode::ConfigError, "missing --in or --text");
  const LoadedModel loaded = load_model(cfg.checkpoint);
  const Vocabulary vocab = Vocabulary::load(vocab_path_for(cfg));
  std::vector<Tokens> sentences = text.empty() ? read_sentences(cfg.input) : std::vector<Tokens>{normalize(text)};
  std::erase_if(sentences, [](const Tokens& t) { return t.empty(); });
  const auto labels = predict(loaded, std::span<const Tokens>(sentences), vocab, cfg.jobs);
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const Tokens head(sentences[i].begin(), sentences[i].begin() + static_cast<std::ptrdiff_t>(labels[i].size()));
    const Tokens fluent = apply_correction(head, labels[i]);
    for (std::size_t j = 0; j < fluent.size(); ++j) out += (j ? " " : "") + fluent[j];
    out += '\n';
  }
  if (cfg.output.empty()) {
    std::fputs(out.c_str(), stdout);
  } else {
    tc::write_file_atomic(cfg.output, out);
  }
  return kExitOk;
}

int run_gradcheck(std::uint64_t seed, double h, double tolerance) {
  const LossGradCheck report = check_loss_gradients(seed, h);
  std::printf("discriminator_max_rel_error=%.3e worst=%s\n", report.discriminator.max_rel_error,
              report.discriminator.worst_param.c_str());
  std::printf("generator_max_rel_error=%.3e worst=%s\n", report.generator.max_rel_error,
              report.generator.worst_param.c_str());
  std::printf("max_rel_error=%.3e\n", report.max_rel_error);
  if (!report.passed(tolerance)) {
    std::fprintf(stderr, "gradcheck FAILED: %.3e >= %.1e at %s\n", report.max_rel_error, tolerance,
                 report.worst_param.c_str());
    return kExitDiagnostic;
  }
  std::printf("gradcheck passed\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disfluency correction: synthesis, adversarial semi-supervised training, evaluation"};
  app.require_subcommand(1);

  Command synth{app.add_subcommand("synth", "inject disfluencies into fluent sentences")};
  synth.add_keys({"in", "out", "lexicon", "budget", "seed", "lang", "max_injections", "stutter_max_fragments",
                  "type_weights", "jobs"});

  Command train_cmd{app.add_subcommand("train", "train the tagger")};
  train_cmd.add_keys({"labeled", "unlabeled", "heldout", "mode", "checkpoint", "history", "vocab", "seed", "steps",
                      "batch_size_labeled", "batch_size_unlabeled", "lr_d", "lr_g", "eval_every",
                      "feature_match_weight", "model_dim", "n_layers", "n_heads", "max_len", "feedforward_dim",
                      "noise_dim", "generator_hidden", "min_freq"});

  Command eval{app.add_subcommand("eval", "score a checkpoint on a labeled corpus")};
  eval.add_keys({"checkpoint", "test", "vocab", "report", "jobs"});

  Command correct{app.add_subcommand("correct", "drop tokens tagged disfluent")};
  correct.add_keys({"checkpoint", "in", "out", "vocab", "jobs"});
  std::string text;
  correct.app->add_option("--text", text, "a single sentence instead of --in");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the training losses");
  std::uint64_t gc_seed = 1;
  double gc_h = 1e-3;
  double gc_tol = 1e-3;
  gradcheck->add_option("--seed", gc_seed, "model and sampling seed");
  gradcheck->add_option("--step", gc_h, "central-difference step");
  gradcheck->add_option("--tolerance", gc_tol, "maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitData;
  }

  try {
    if (synth.app->parsed()) return run_synth(synth.resolve());
    if (train_cmd.app->parsed()) return run_train(train_cmd.resolve());
    if (eval.app->parsed()) return run_eval(eval.resolve());
    if (correct.app->parsed()) return run_correct(correct.resolve(), text);
    if (gradcheck->parsed()) return run_gradcheck(gc_seed, gc_h, gc_tol);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitOk;
}
