#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "disfl/corpus.hpp"
#include "disfl/errors.hpp"

using namespace disfl;

namespace {

ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
}

ParallelPair event_pair() {
  ParallelPair p;
  p.disfluent.tokens = {"what", "about", "the", "uh", "event"};
  p.disfluent.labels = {Label::Fluent, Label::Fluent, Label::Fluent, Label::Disfluent, Label::Fluent};
  p.disfluent.language = "en";
  p.fluent = {"what", "about", "the", "event"};
  return p;
}

Corpus numbered(std::size_t n) {
  Corpus c;
  c.language = "bn";
  for (std::size_t i = 0; i < n; ++i) c.labeled.push_back(fluent_pair({"w" + std::to_string(i), "x"}, "bn"));
  return c;
}

}  // namespace

TEST_CASE("jsonl record with labels and fluent side parses to one pair") {
  const std::string text =
      R"({"tokens":["what","about","the","uh","event"],"labels":["F","F","F","D","F"],"fluent":["what","about","the","event"]})"
      "\n";
  const Corpus c = parse_corpus(text, CorpusFormat::Jsonl);
  REQUIRE(c.labeled.size() == 1);
  CHECK(c.labeled[0].disfluent.tokens == event_pair().disfluent.tokens);
  CHECK(c.labeled[0].disfluent.labels == event_pair().disfluent.labels);
  CHECK(c.labeled[0].fluent == event_pair().fluent);
  CHECK(c.unlabeled.empty());
}

TEST_CASE("empty input gives an empty corpus") {
  for (auto fmt : {CorpusFormat::Jsonl, CorpusFormat::Tsv}) {
    const Corpus c = parse_corpus("", fmt);
    CHECK(c.labeled.empty());
    CHECK(c.unlabeled.empty());
  }
}

TEST_CASE("token/label count mismatch names the line") {
  const std::string text = "{\"corpus\":{\"lang\":\"en\"}}\n"
                           R"({"tokens":["a","b","c","d","e"],"labels":["F","F","F","D"]})"
                           "\n";
  try {
    parse_corpus(text, CorpusFormat::Jsonl);
    FAIL("expected LENGTH_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("fluent side that does not match the filtered tokens is rejected") {
  const std::string text =
      R"({"tokens":["a","uh","b"],"labels":["F","D","F"],"fluent":["a","uh","b"]})"
      "\n";
  CHECK_THROWS_AS(parse_corpus(text, CorpusFormat::Jsonl), Error);
}

TEST_CASE("unknown fields and bad labels are format errors") {
  CHECK(code_of([] { parse_corpus(R"({"tokens":["a"],"labels":["F"],"extra":1})", CorpusFormat::Jsonl); }) ==
        ErrorCode::FormatError);
  CHECK(code_of([] { parse_corpus(R"({"tokens":["a"],"labels":["X"]})", CorpusFormat::Jsonl); }) ==
        ErrorCode::FormatError);
  CHECK(code_of([] { parse_corpus("not json\n", CorpusFormat::Jsonl); }) == ErrorCode::FormatError);
}

TEST_CASE("round trip in both formats") {
  Corpus c;
  c.language = "en";
  c.labeled.push_back(event_pair());
  c.unlabeled.push_back({{"so", "uh", "yes"}, "en"});
  for (auto fmt : {CorpusFormat::Jsonl, CorpusFormat::Tsv}) {
    const std::string text = serialize_corpus(c, fmt);
    const Corpus back = parse_corpus(text, fmt);
    CHECK(back == c);
    CHECK(serialize_corpus(back, fmt) == text);
  }
}

TEST_CASE("devanagari tokens survive byte-exact") {
  Corpus c;
  c.language = "hi";
  ParallelPair p;
  p.disfluent.tokens = {"मैं", "उम्म", "घर", "जा", "रहा", "हूँ"};
  p.disfluent.labels = {Label::Fluent, Label::Disfluent, Label::Fluent, Label::Fluent, Label::Fluent, Label::Fluent};
  p.disfluent.language = "hi";
  p.fluent = {"मैं", "घर", "जा", "रहा", "हूँ"};
  c.labeled.push_back(p);
  for (auto fmt : {CorpusFormat::Jsonl, CorpusFormat::Tsv}) CHECK(parse_corpus(serialize_corpus(c, fmt), fmt) == c);
}

TEST_CASE("file save/load and io errors") {
  const auto dir = std::filesystem::temp_directory_path() / "disfl_corpus_test";
  std::filesystem::create_directories(dir);
  Corpus c;
  c.language = "en";
  c.labeled.push_back(event_pair());
  const auto path = dir / "c.jsonl";
  save_corpus(c, path, CorpusFormat::Jsonl);
  CHECK(load_corpus(path, CorpusFormat::Jsonl) == c);
  CHECK(code_of([&] { load_corpus(dir / "missing.jsonl", CorpusFormat::Jsonl); }) == ErrorCode::IoError);
  CHECK(code_of([&] { save_corpus(c, dir / "no" / "such" / "dir" / "c.jsonl", CorpusFormat::Jsonl); }) ==
        ErrorCode::IoError);
  CHECK(format_for_path("x.tsv") == CorpusFormat::Tsv);
  CHECK(format_for_path("x.jsonl") == CorpusFormat::Jsonl);
  std::filesystem::remove_all(dir);
}

TEST_CASE("split sizes, determinism and range") {
  const Corpus c = numbered(250);
  const auto [train, test] = split_corpus(c, 150, 3);
  CHECK(train.labeled.size() == 150);
  CHECK(test.labeled.size() == 100);
  CHECK(split_corpus(c, 150, 3) == std::make_pair(train, test));
  // Disjoint and exhaustive.
  std::vector<std::string> seen;
  for (const auto* part : {&train, &test}) {
    for (const auto& p : part->labeled) seen.push_back(p.fluent[0]);
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  CHECK(seen.size() == 250);

  const auto [empty_train, full_test] = split_corpus(c, 0, 3);
  CHECK(empty_train.labeled.empty());
  CHECK(full_test.labeled.size() == 250);
  CHECK(code_of([&] { split_corpus(c, 251, 3); }) == ErrorCode::RangeError);
}

TEST_CASE("mixing keeps the labeled language and strips labels from the other side") {
  Corpus bn = numbered(3);
  Corpus hi;
  hi.language = "hi";
  hi.labeled.push_back(fluent_pair({"घर"}, "hi"));
  hi.unlabeled.push_back({{"जा"}, "hi"});
  const Corpus mixed = mix_corpora(bn, hi);
  CHECK(mixed.language == "bn");
  CHECK(mixed.labeled == bn.labeled);
  CHECK(mixed.unlabeled.size() == 2);

  Corpus none;
  none.language = "hi";
  CHECK(mix_corpora(bn, none) == bn);

  const Corpus self = mix_corpora(mixed, mixed);
  CHECK(self.unlabeled.size() == mixed.labeled.size() + mixed.unlabeled.size());
}

TEST_CASE("filter keeps fluent tokens in order") {
  const auto p = event_pair();
  CHECK(filter_fluent(p.disfluent.tokens, p.disfluent.labels) == p.fluent);
  CHECK(code_of([] { filter_fluent({"a", "b"}, {Label::Fluent}); }) == ErrorCode::AlignmentError);
}
