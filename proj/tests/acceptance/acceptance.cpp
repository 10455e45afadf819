// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --only 3,5      run a subset
//   acceptance --ablation-out F   run the mode ablation and save the runs to F
//   acceptance --ablation-in F    read criteria 7 and 8 from a saved ablation

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "disfl/artifact.hpp"
#include "disfl/batching.hpp"
#include "disfl/checkpoint.hpp"
#include "disfl/diagnostics.hpp"
#include "disfl/errors.hpp"
#include "disfl/evaluate.hpp"
#include "disfl/ops.hpp"
#include "disfl/synth.hpp"
#include "disfl/trainer.hpp"
#include "toy_language.hpp"

namespace fs = std::filesystem;
using namespace disfl;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kRoundTripRuntimeS = 30.0;
constexpr double kBudget = 0.20;
constexpr double kBudgetTol = 0.02;
constexpr double kGradTol = 1e-3;
constexpr std::size_t kGradMinCoords = 64;
constexpr double kGradRuntimeS = 120.0;
constexpr std::size_t kAblationSeeds = 5;
constexpr std::size_t kAblationSteps = 2000;
constexpr double kAblationMargin = 2.0;
constexpr double kAblationRuntimeS = 45 * 60.0;
constexpr double kStutterF1Floor = 80.0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

void report(int id, const std::string& name, const Outcome& o) {
  std::printf("criterion %2d %-28s %s  %s\n", id, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Independent filter used as the oracle for recovery.
Tokens drop_disfluent(const TaggedSentence& s) {
  Tokens out;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (s.labels[i] == Label::Fluent) out.push_back(s.tokens[i]);
  }
  return out;
}

Outcome synthesis_round_trip() {
  const auto t0 = Clock::now();
  const auto fluent = toy::sentences(toy::Dialect::Primary, 10000, 101);
  SynthConfig cfg;
  cfg.budget = kBudget;
  cfg.type_weights = {1, 1, 1, 1, 1, 1, 1};
  cfg.seed = 101;
  const auto result = synthesize(fluent, cfg, toy::lexicons(toy::Dialect::Primary), "xa");
  std::size_t recovered = 0;
  for (std::size_t i = 0; i < fluent.size(); ++i) {
    const auto& pair = result.corpus.labeled[i];
    recovered += drop_disfluent(pair.disfluent) == fluent[i] && pair.fluent == fluent[i];
  }
  std::size_t types_seen = 0;
  for (std::size_t c : result.stats.type_counts) types_seen += c > 0;
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = result.corpus.labeled.size() == 10000 && recovered == 10000 && types_seen == kNumDisfluencyTypes &&
           secs < kRoundTripRuntimeS;
  o.detail = fmt("recovered %zu/10000, types %zu/7, %.1fs (limit %.0fs)", recovered, types_seen, secs,
                 kRoundTripRuntimeS);
  return o;
}

Outcome budget_control() {
  const auto fluent = toy::sentences(toy::Dialect::Primary, 500, 202);
  SynthConfig cfg;
  cfg.budget = kBudget;
  cfg.seed = 202;
  const Corpus c = synthesize_corpus(fluent, cfg, toy::lexicons(toy::Dialect::Primary), "xa");
  std::size_t d = 0, n = 0;
  for (const auto& p : c.labeled) {
    for (Label l : p.disfluent.labels) {
      d += l == Label::Disfluent;
      ++n;
    }
  }
  const double frac = static_cast<double>(d) / static_cast<double>(n);
  return {std::abs(frac - kBudget) <= kBudgetTol, fmt("disfluent fraction %.4f (target %.2f +/- %.2f)", frac, kBudget,
                                                      kBudgetTol)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const LossGradCheck r = check_loss_gradients(1, 1e-3);
  const double secs = seconds_since(t0);
  std::size_t enc = 0, disc = 0, gen = 0;
  for (const auto& p : r.discriminator.params) (p.name.starts_with("enc.") ? enc : disc) += p.coords_checked;
  for (const auto& p : r.generator.params) gen += p.coords_checked;
  Outcome o;
  o.pass = r.max_rel_error < kGradTol && enc >= kGradMinCoords && disc >= kGradMinCoords && gen >= kGradMinCoords &&
           secs < kGradRuntimeS;
  o.detail = fmt("max rel err %.2e at %s (d_loss %.2e, g_loss %.2e; limit %.0e), coords enc/disc/gen %zu/%zu/%zu, %.1fs",
                 r.max_rel_error, r.worst_param.c_str(), r.discriminator.max_rel_error, r.generator.max_rel_error,
                 kGradTol, enc, disc, gen, secs);
  return o;
}

Outcome unlabeled_isolation() {
  const auto data = toy::ablation_data(20, 20, 0, 404);
  const Corpus corpora[] = {data.train};
  const Vocabulary vocab = build_vocab(corpora);
  model::ModelConfig cfg;
  cfg.encoder.vocab_size = vocab.size();
  const model::SeqGan<float> m(cfg, 404);

  model::Batch unl;
  for (const auto& u : data.train.unlabeled) unl.append(encode_unlabeled(u.tokens, vocab, cfg.encoder.max_len));
  Rng rng(404);
  const auto noise = model::sample_noise<float>(rng, unl.size, cfg.generator.noise_dim);
  const auto real = m.discriminate(m.encode(unl));
  const auto fake = m.discriminate(m.generate(noise));
  const std::vector<float> ones(unl.size, 1.0f), zeros(unl.size, 0.0f);
  auto total = tc::add(
      tc::add(token_loss(real, unl), tc::binary_cross_entropy_with_logits(real.real_logit, std::span<const float>(ones))),
      tc::binary_cross_entropy_with_logits(fake.real_logit, std::span<const float>(zeros)));
  total.backward();
  std::size_t nonzero = 0, checked = 0;
  for (const char* name : {"disc.token.w", "disc.token.b"}) {
    auto p = m.param(name);
    for (float g : p.grad().values()) {
      nonzero += g != 0.0f;
      ++checked;
    }
  }
  double encoder_norm = 0.0;
  auto emb = m.param("enc.tok_emb");
  for (float g : emb.grad().values()) encoder_norm += double(g) * g;
  return {nonzero == 0 && checked > 0 && encoder_norm > 0.0,
          fmt("%zu/%zu token-head gradient entries nonzero; encoder gradient norm^2 %.3e", nonzero, checked,
              encoder_norm)};
}

Outcome metric_oracle() {
  Rng rng(505);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 8);
    std::vector<Labels> gold(n), pred(n);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t len = uniform_index(rng, 12);
      for (std::size_t i = 0; i < len; ++i) {
        const bool g = uniform_index(rng, 4) == 0;
        const bool p = uniform_index(rng, 4) == 0;
        gold[s].push_back(g ? Label::Disfluent : Label::Fluent);
        pred[s].push_back(p ? Label::Disfluent : Label::Fluent);
        tp += g && p;
        fp += !g && p;
        fn += g && !p;
      }
    }
    const auto r = score(gold, pred);
    const double precision = tp + fp ? 100.0 * tp / (tp + fp) : 0.0;
    const double recall = tp + fn ? 100.0 * tp / (tp + fn) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    mismatches += r.tp != tp || r.fp != fp || r.fn != fn || r.precision != precision || r.recall != recall ||
                  r.f1 != f1;
  }
  const auto D = Label::Disfluent, F = Label::Fluent;
  const auto hand = score(std::vector<Labels>{{D, F, F, D}}, std::vector<Labels>{{D, D, F, F}});
  const bool hand_ok = hand.precision == 50.0 && hand.recall == 50.0 && hand.f1 == 50.0;
  return {mismatches == 0 && hand_ok,
          fmt("%zu/1000 mismatches vs brute-force recount; hand case P/R/F1 %.1f/%.1f/%.1f", mismatches,
              hand.precision, hand.recall, hand.f1)};
}

Outcome determinism() {
  const auto data = toy::ablation_data(150, 500, 0, 606);
  const Corpus corpora[] = {data.train};
  const Vocabulary vocab = build_vocab(corpora);
  model::ModelConfig cfg;
  cfg.encoder.vocab_size = vocab.size();
  TrainConfig tc;
  tc.steps = 50;
  tc.seed = 606;
  tc.eval_every = 0;
  tc.mode = TrainMode::AdversarialUnlabeled;
  const auto a = train(data.train, vocab, cfg, tc);
  const auto b = train(data.train, vocab, cfg, tc);
  std::size_t equal = 0;
  for (std::size_t i = 0; i < 50; ++i) equal += a.history[i].loss == b.history[i].loss;
  const bool weights = a.final_model.to_named_tensors() == b.final_model.to_named_tensors();
  return {equal == 50 && weights, fmt("%zu/50 identical loss reports, final weights %s", equal,
                                      weights ? "identical" : "differ")};
}

// Mode ablation -----------------------------------------------------------

const TrainMode kModes[] = {TrainMode::Supervised, TrainMode::Adversarial, TrainMode::AdversarialUnlabeled};

struct Run {
  std::string mode;
  std::uint64_t seed = 0;
  double precision = 0, recall = 0, f1 = 0, seconds = 0;
};

struct Ablation {
  std::vector<Run> runs;
  double seconds = 0;
};

Ablation run_ablation() {
  Ablation out;
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= kAblationSeeds; ++seed) {
    const auto data = toy::ablation_data(150, 500, 100, seed);
    // One vocabulary for all modes so only the objective differs.
    const Corpus corpora[] = {data.train};
    const Vocabulary vocab = build_vocab(corpora);
    model::ModelConfig cfg;
    cfg.encoder.vocab_size = vocab.size();
    for (TrainMode mode : kModes) {
      TrainConfig tc;
      tc.steps = kAblationSteps;
      tc.seed = seed;
      tc.mode = mode;
      tc.eval_every = 0;
      const auto r0 = Clock::now();
      const auto result = train(data.train, vocab, cfg, tc);
      const auto rep = evaluate_corpus(result.final_model, data.test, vocab);
      Run run{std::string(to_string(mode)), seed, rep.precision, rep.recall, rep.f1, seconds_since(r0)};
      std::fprintf(stderr, "ablation seed %llu %-22s P %.2f R %.2f F1 %.2f (%.0fs)\n",
                   static_cast<unsigned long long>(seed), run.mode.c_str(), run.precision, run.recall, run.f1,
                   run.seconds);
      out.runs.push_back(run);
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

std::string ablation_json(const Ablation& a) {
  nlohmann::ordered_json j;
  j["seconds"] = a.seconds;
  for (const auto& r : a.runs) {
    j["runs"].push_back({{"mode", r.mode}, {"seed", r.seed}, {"precision", r.precision}, {"recall", r.recall},
                         {"f1", r.f1}, {"seconds", r.seconds}});
  }
  return j.dump(2) + "\n";
}

Ablation parse_ablation(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Ablation a;
  a.seconds = j.at("seconds");
  for (const auto& r : j.at("runs")) {
    a.runs.push_back({r.at("mode"), r.at("seed"), r.at("precision"), r.at("recall"), r.at("f1"), r.at("seconds")});
  }
  return a;
}

struct ModeSummary {
  MeanStd precision, recall, f1;
};

ModeSummary summarize(const Ablation& a, TrainMode mode) {
  std::vector<double> p, r, f;
  for (const auto& run : a.runs) {
    if (run.mode != to_string(mode)) continue;
    p.push_back(run.precision);
    r.push_back(run.recall);
    f.push_back(run.f1);
  }
  return {mean_std(p), mean_std(r), mean_std(f)};
}

void print_ablation_table(const Ablation& a) {
  std::printf("  %-22s | %-13s | %-13s | %-13s\n", "mode (5 seeds)", "P", "R", "F1");
  for (TrainMode mode : kModes) {
    const auto s = summarize(a, mode);
    std::printf("  %-22s | %5.2f +/- %4.2f | %5.2f +/- %4.2f | %5.2f +/- %4.2f\n", std::string(to_string(mode)).c_str(),
                s.precision.mean, s.precision.stdev, s.recall.mean, s.recall.stdev, s.f1.mean, s.f1.stdev);
  }
  std::printf("  total ablation runtime %.1f min\n", a.seconds / 60.0);
}

Outcome ablation_ordering(const Ablation& a) {
  const auto sup = summarize(a, TrainMode::Supervised);
  const auto adv = summarize(a, TrainMode::Adversarial);
  const auto full = summarize(a, TrainMode::AdversarialUnlabeled);
  const bool over_adv = full.f1.mean >= adv.f1.mean;
  const bool over_sup = full.f1.mean >= sup.f1.mean + kAblationMargin;
  const bool fast = a.seconds < kAblationRuntimeS;
  return {over_adv && over_sup && fast && a.runs.size() == 3 * kAblationSeeds,
          fmt("mean F1 adv+unl %.2f vs adv %.2f (%s), vs sup %.2f + %.1f (%s), %.1f min (limit 45)", full.f1.mean,
              adv.f1.mean, over_adv ? "ok" : "below", sup.f1.mean, kAblationMargin, over_sup ? "ok" : "below",
              a.seconds / 60.0)};
}

Outcome recall_behavior(const Ablation& a) {
  const auto sup = summarize(a, TrainMode::Supervised);
  const auto full = summarize(a, TrainMode::AdversarialUnlabeled);
  const double recall_gain = full.recall.mean - sup.recall.mean;
  const double precision_drop = std::max(0.0, sup.precision.mean - full.precision.mean);
  return {recall_gain > 0.0 && precision_drop < recall_gain,
          fmt("mean recall adv+unl %.2f vs sup %.2f (gain %+.2f); precision %.2f vs %.2f (drop %.2f)",
              full.recall.mean, sup.recall.mean, recall_gain, full.precision.mean, sup.precision.mean,
              precision_drop)};
}

// Stutter protocol and checkpoint round trip --------------------------------

struct StutterRun {
  Corpus train, test;
  Vocabulary vocab;
  model::SeqGan<float> model;
  MetricReport report;
};

StutterRun stutter_run() {
  const auto fluent = toy::sentences(toy::Dialect::Primary, 250, 909);
  SynthConfig scfg;
  scfg.budget = kBudget;
  scfg.type_weights = {0, 0, 0, 0, 0, 0, 1};
  scfg.seed = 909;
  const Corpus all = synthesize_corpus(fluent, scfg, toy::lexicons(toy::Dialect::Primary), "xa");
  auto [train_part, test_part] = split_corpus(all, 150, 909);
  const Corpus corpora[] = {train_part};
  Vocabulary vocab = build_vocab(corpora);
  model::ModelConfig cfg;
  cfg.encoder.vocab_size = vocab.size();
  TrainConfig tc;
  tc.steps = kAblationSteps;
  tc.seed = 909;
  tc.mode = TrainMode::AdversarialUnlabeled;
  tc.eval_every = 0;
  auto result = train(train_part, vocab, cfg, tc);
  const auto rep = evaluate_corpus(result.final_model, test_part, vocab);
  return {std::move(train_part), std::move(test_part), std::move(vocab), std::move(result.final_model), rep};
}

Outcome stutter_protocol(const StutterRun& run) {
  return {run.report.f1 > kStutterF1Floor && run.train.labeled.size() == 150 && run.test.labeled.size() == 100,
          fmt("STUTTER 150/100 split: test P %.2f R %.2f F1 %.2f (floor %.0f)", run.report.precision,
              run.report.recall, run.report.f1, kStutterF1Floor)};
}

Outcome checkpoint_round_trip(const StutterRun& run) {
  const fs::path dir = fs::temp_directory_path() / ("disfl_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  save_model(dir / "model.ckpt", run.model, run.vocab, "adversarial+unlabeled", kAblationSteps);
  run.vocab.save(dir / "model.vocab");
  const LoadedModel loaded = load_model(dir / "model.ckpt");
  const Vocabulary vocab = Vocabulary::load(dir / "model.vocab");
  std::vector<Tokens> sentences;
  for (const auto& p : run.test.labeled) sentences.push_back(p.disfluent.tokens);
  const auto before = predict(run.model, std::span<const Tokens>(sentences), run.vocab);
  const auto after = predict(loaded, std::span<const Tokens>(sentences), vocab);
  const bool weights = loaded.model.to_named_tensors() == run.model.to_named_tensors();
  std::size_t same = 0;
  for (std::size_t i = 0; i < before.size(); ++i) same += before[i] == after[i];
  fs::remove_all(dir);
  return {same == before.size() && weights && !before.empty(),
          fmt("%zu/%zu sentences predicted identically after reload, weights %s", same, before.size(),
              weights ? "bit-identical" : "differ")};
}

std::set<int> parse_only(const std::string& text) {
  std::set<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::string ablation_out, ablation_in;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = parse_only(argv[++i]);
    } else if (arg == "--ablation-out" && i + 1 < argc) {
      ablation_out = argv[++i];
    } else if (arg == "--ablation-in" && i + 1 < argc) {
      ablation_in = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N,M] [--ablation-out FILE] [--ablation-in FILE]\n");
      return 2;
    }
  }

  if (!ablation_out.empty()) {
    const Ablation a = run_ablation();
    tc::write_file_atomic(ablation_out, ablation_json(a));
    print_ablation_table(a);
    return 0;
  }

  auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };
  int failures = 0;
  auto run = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    report(id, name, o);
    failures += !o.pass;
  };

  run(1, "synthesis-round-trip", synthesis_round_trip);
  run(2, "budget-control", budget_control);
  run(3, "gradient-check", gradient_check);
  run(4, "unlabeled-isolation", unlabeled_isolation);
  run(5, "metric-oracle", metric_oracle);
  run(6, "determinism", determinism);

  if (wanted(7) || wanted(8)) {
    std::optional<Ablation> ablation;
    try {
      ablation = ablation_in.empty() ? run_ablation() : parse_ablation(tc::read_file(ablation_in));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "ablation unavailable: %s\n", e.what());
    }
    if (ablation) print_ablation_table(*ablation);
    run(7, "ablation-ordering", [&] { return ablation ? ablation_ordering(*ablation) : Outcome{false, "no ablation"}; });
    run(8, "recall-behavior", [&] { return ablation ? recall_behavior(*ablation) : Outcome{false, "no ablation"}; });
  }

  if (wanted(9) || wanted(10)) {
    std::optional<StutterRun> stutter;
    try {
      stutter = stutter_run();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "stutter run failed: %s\n", e.what());
    }
    run(9, "stutter-protocol", [&] { return stutter ? stutter_protocol(*stutter) : Outcome{false, "no run"}; });
    run(10, "checkpoint-round-trip",
        [&] { return stutter ? checkpoint_round_trip(*stutter) : Outcome{false, "no run"}; });
  }
  return failures == 0 ? 0 : 1;
}
