#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <nlohmann/json.hpp>

#include "disfl/artifact.hpp"
#include "disfl/errors.hpp"
#include "disfl/evaluate.hpp"
#include "disfl/trainer.hpp"
#include "toy_language.hpp"

using namespace disfl;

namespace {

constexpr Label F = Label::Fluent;
constexpr Label D = Label::Disfluent;

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Brute-force confusion recount.
Counts recount(const std::vector<Labels>& gold, const std::vector<Labels>& pred) {
  Counts c;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    for (std::size_t i = 0; i < gold[s].size(); ++i) {
      if (gold[s][i] == D && pred[s][i] == D) ++c.tp;
      if (gold[s][i] == F && pred[s][i] == D) ++c.fp;
      if (gold[s][i] == D && pred[s][i] == F) ++c.fn;
    }
  }
  return c;
}

model::ModelConfig tiny(std::size_t vocab) {
  model::ModelConfig c;
  c.encoder.vocab_size = vocab;
  c.encoder.model_dim = 16;
  c.encoder.max_len = 8;
  c.encoder.feedforward_dim = 16;
  c.generator.noise_dim = 4;
  c.generator.hidden_dim = 8;
  return c;
}

}  // namespace

TEST_CASE("hand-counted confusion matrix") {
  const std::vector<Labels> gold{{D, F, F, D}};
  const std::vector<Labels> pred{{D, D, F, F}};
  const auto r = score(gold, pred);
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.precision == 50.0);
  CHECK(r.recall == 50.0);
  CHECK(r.f1 == 50.0);
  CHECK_FALSE(r.degenerate);
}

TEST_CASE("perfect and degenerate predictions") {
  const std::vector<Labels> gold{{F, D, F}, {D}};
  const auto perfect = score(gold, gold);
  CHECK(perfect.precision == 100.0);
  CHECK(perfect.recall == 100.0);
  CHECK(perfect.f1 == 100.0);
  CHECK(perfect.exact_match_rate == 100.0);

  const std::vector<Labels> fluent{{F, F}, {F}};
  const auto degenerate = score(fluent, fluent);
  CHECK(degenerate.f1 == 0.0);
  CHECK(degenerate.precision == 0.0);
  CHECK(degenerate.degenerate);
  CHECK(degenerate.to_key_value().find("degenerate=true") != std::string::npos);
}

TEST_CASE("score agrees with a brute-force recount") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 6);
    std::vector<Labels> gold(n), pred(n);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t len = uniform_index(rng, 10);
      for (std::size_t i = 0; i < len; ++i) {
        gold[s].push_back(uniform_index(rng, 3) == 0 ? D : F);
        pred[s].push_back(uniform_index(rng, 3) == 0 ? D : F);
      }
    }
    const auto r = score(gold, pred);
    const auto c = recount(gold, pred);
    CHECK(r.tp == c.tp);
    CHECK(r.fp == c.fp);
    CHECK(r.fn == c.fn);
    // Order of sentences does not matter.
    std::reverse(gold.begin(), gold.end());
    std::reverse(pred.begin(), pred.end());
    CHECK(score(gold, pred).f1 == r.f1);
  }
}

TEST_CASE("alignment errors") {
  const std::vector<Labels> a{{F, D}}, b{{F}}, two{{F}, {F}};
  CHECK_THROWS_AS(score(a, b), Error);
  CHECK_THROWS_AS(score(a, two), Error);
  try {
    apply_correction({"a", "b"}, {F});
    FAIL("expected ALIGNMENT_ERROR");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AlignmentError);
  }
}

TEST_CASE("correction keeps fluent tokens") {
  CHECK(apply_correction({"what", "about", "the", "uh", "event"}, {F, F, F, D, F}) ==
        Tokens{"what", "about", "the", "event"});
  CHECK(apply_correction({"a", "b"}, {F, F}) == Tokens{"a", "b"});
  CHECK(apply_correction({"a", "b"}, {D, D}).empty());
  const auto r = score(std::vector<Labels>{{D, D}}, std::vector<Labels>{{D, D}});
  CHECK(r.empty_corrections == 1);
}

TEST_CASE("synthesized pairs are corrected back by their gold labels") {
  const auto data = toy::ablation_data(100, 0, 0, 3);
  for (const auto& p : data.train.labeled) CHECK(apply_correction(p.disfluent.tokens, p.disfluent.labels) == p.fluent);
}

TEST_CASE("argmax with ties going to fluent") {
  CHECK(argmax_label(0.9, 0.1) == F);
  CHECK(argmax_label(0.1, 0.9) == D);
  CHECK(argmax_label(0.5f, 0.5f) == F);
}

TEST_CASE("prediction shape, truncation, determinism and vocabulary checks") {
  const auto data = toy::ablation_data(30, 0, 10, 4);
  const Corpus corpora[] = {data.train};
  const Vocabulary vocab = build_vocab(corpora);
  const model::SeqGan<float> m(tiny(vocab.size()), 2);
  std::vector<Tokens> sentences;
  for (const auto& p : data.test.labeled) sentences.push_back(p.disfluent.tokens);
  sentences.push_back(Tokens(12, "plan"));
  const auto pred = predict(m, std::span<const Tokens>(sentences), vocab);
  REQUIRE(pred.size() == sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) CHECK(pred[i].size() == std::min<std::size_t>(sentences[i].size(), 8));
  CHECK(predict(m, std::span<const Tokens>(sentences), vocab, 3) == pred);
  CHECK(predict(m, std::span<const Tokens>(sentences), vocab, 4, 3) == pred);

  const auto report = evaluate_corpus(m, data.test, vocab);
  CHECK(report.sentences == data.test.labeled.size());

  const auto dir = std::filesystem::temp_directory_path() / "disfl_eval_test";
  std::filesystem::create_directories(dir);
  save_model(dir / "m.ckpt", m, vocab, "supervised", 0);
  const auto loaded = load_model(dir / "m.ckpt");
  CHECK(predict(loaded, std::span<const Tokens>(sentences), vocab) == pred);
  const Vocabulary other = Vocabulary::from_tokens({"x", "y"});
  try {
    predict(loaded, std::span<const Tokens>(sentences), other);
    FAIL("expected VOCAB_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::VocabMismatch);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("report rendering") {
  const auto r = score(std::vector<Labels>{{D, F, F, D}}, std::vector<Labels>{{D, D, F, F}});
  const std::string kv = r.to_key_value();
  CHECK(kv.find("micro") != std::string::npos);
  CHECK(kv.find("f1=50.00") != std::string::npos);
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["averaging"] == "micro");
  CHECK(j["tp"] == 1);
  const std::vector<std::pair<std::string, MetricReport>> rows{{"supervised", r}, {"adversarial+unlabeled", r}};
  const std::string table = render_table(rows);
  CHECK(table.find("adversarial+unlabeled |  50.00 |  50.00 |  50.00") != std::string::npos);
  const std::vector<double> xs{1.0, 2.0, 3.0};
  CHECK(mean_std(xs).mean == 2.0);
  CHECK(mean_std(xs).stdev == doctest::Approx(1.0));
}
