// Python bindings for the disfluency tagger.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disfl/artifact.hpp"
#include "disfl/corpus.hpp"
#include "disfl/diagnostics.hpp"
#include "disfl/errors.hpp"
#include "disfl/evaluate.hpp"
#include "disfl/run_config.hpp"
#include "disfl/synth.hpp"
#include "disfl/textnorm.hpp"
#include "disfl/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace disfl;

namespace {

Labels to_labels(const std::vector<int>& values) {
  Labels out;
  out.reserve(values.size());
  for (int v : values) {
    if (v != 0 && v != 1) fail(ErrorCode::RangeError, "labels must be 0 (fluent) or 1 (disfluent)");
    out.push_back(v ? Label::Disfluent : Label::Fluent);
  }
  return out;
}

std::vector<int> to_ints(const Labels& labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (Label l : labels) out.push_back(l == Label::Disfluent);
  return out;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["tp"] = r.tp;
  d["fp"] = r.fp;
  d["fn"] = r.fn;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["f1"] = r.f1;
  d["exact_match_rate"] = r.exact_match_rate;
  d["sentences"] = r.sentences;
  d["degenerate"] = r.degenerate;
  return d;
}

fs::path vocab_path(const fs::path& checkpoint, const std::optional<fs::path>& vocab) {
  return vocab ? *vocab : fs::path(checkpoint.string() + ".vocab");
}

// Loaded checkpoint plus its vocabulary.
class Model {
 public:
  Model(const fs::path& checkpoint, const std::optional<fs::path>& vocab)
      : loaded_(load_model(checkpoint)), vocab_(Vocabulary::load(vocab_path(checkpoint, vocab))) {
    require_vocab(loaded_.metadata, vocab_);
  }

  std::vector<std::vector<int>> predict(const std::vector<Tokens>& sentences, std::size_t jobs) const {
    std::vector<Labels> labels;
    {
      py::gil_scoped_release release;
      labels = disfl::predict(loaded_, std::span<const Tokens>(sentences), vocab_, jobs);
    }
    std::vector<std::vector<int>> out;
    for (const auto& l : labels) out.push_back(to_ints(l));
    return out;
  }

  std::string correct(const std::string& text) const {
    const Tokens tokens = normalize(text);
    if (tokens.empty()) return "";
    const Tokens one[] = {tokens};
    const auto labels = disfl::predict(loaded_, std::span<const Tokens>(one), vocab_);
    const Tokens head(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(labels[0].size()));
    std::string out;
    for (const auto& t : apply_correction(head, labels[0])) out += (out.empty() ? "" : " ") + t;
    return out;
  }

  py::dict evaluate(const fs::path& test, std::size_t jobs) const {
    const Corpus corpus = load_corpus(test, format_for_path(test));
    MetricReport r;
    {
      py::gil_scoped_release release;
      r = evaluate_corpus(loaded_.model, corpus, vocab_, jobs);
    }
    return report_dict(r);
  }

  std::size_t parameter_count() const { return loaded_.model.parameter_count(); }
  const std::string& mode() const { return loaded_.metadata.mode; }
  std::uint64_t step() const { return loaded_.metadata.step; }
  std::size_t vocab_size() const { return vocab_.size(); }

 private:
  LoadedModel loaded_;
  Vocabulary vocab_;
};

void apply_settings(RunConfig& cfg, const py::kwargs& settings) {
  for (const auto& [key, value] : settings) {
    apply_setting(cfg, py::str(key).cast<std::string>(), py::str(value).cast<std::string>());
  }
}

py::dict train_files(const fs::path& labeled, const fs::path& checkpoint, const std::optional<fs::path>& unlabeled,
                     const py::kwargs& settings) {
  RunConfig cfg;
  apply_settings(cfg, settings);
  const Corpus labeled_corpus = load_corpus(labeled, format_for_path(labeled));
  Corpus mixed = labeled_corpus;
  if (unlabeled && cfg.train.mode != TrainMode::Supervised) {
    mixed = mix_corpora(labeled_corpus, load_corpus(*unlabeled, format_for_path(*unlabeled)));
  }
  if (cfg.train.mode == TrainMode::Supervised) mixed.unlabeled.clear();
  const Corpus corpora[] = {mixed};
  const Vocabulary vocab = build_vocab(corpora, cfg.min_freq);
  vocab.save(vocab_path(checkpoint, std::nullopt));
  model::ModelConfig model_cfg = cfg.model;
  model_cfg.encoder.vocab_size = vocab.size();
  const TrainResult result = [&] {
    py::gil_scoped_release release;
    return train(mixed, vocab, model_cfg, cfg.train, {}, TrainOutputs{checkpoint, cfg.history});
  }();
  py::list losses;
  for (const auto& h : result.history) {
    py::dict d;
    d["l_sup"] = h.loss.l_sup;
    d["l_d"] = h.loss.l_d_total;
    d["l_g"] = h.loss.l_g_total;
    losses.append(d);
  }
  py::dict out;
  out["mode"] = std::string(to_string(cfg.train.mode));
  out["labeled"] = mixed.labeled.size();
  out["unlabeled"] = mixed.unlabeled.size();
  out["vocab_size"] = vocab.size();
  out["parameters"] = result.final_model.parameter_count();
  out["history"] = losses;
  return out;
}

py::dict synthesize_sentences(const std::vector<Tokens>& sentences, const std::optional<fs::path>& lexicon,
                              const std::string& language, const std::optional<fs::path>& out,
                              const py::kwargs& settings) {
  RunConfig cfg;
  apply_settings(cfg, settings);
  const Lexicons lex = lexicon ? Lexicons::load(*lexicon) : Lexicons::english_default();
  const SynthResult result = synthesize(sentences, cfg.synth, lex, language, cfg.jobs);
  if (out) save_corpus(result.corpus, *out, format_for_path(*out));
  py::list pairs;
  for (const auto& p : result.corpus.labeled) {
    py::dict d;
    d["tokens"] = p.disfluent.tokens;
    d["labels"] = to_ints(p.disfluent.labels);
    d["fluent"] = p.fluent;
    pairs.append(d);
  }
  py::dict counts;
  for (auto type : kAllDisfluencyTypes) {
    counts[py::str(std::string(to_string(type)))] = result.stats.type_counts[static_cast<std::size_t>(type)];
  }
  py::dict d;
  d["pairs"] = pairs;
  d["disfluent_fraction"] = result.stats.disfluent_fraction();
  d["type_counts"] = counts;
  return d;
}

}  // namespace

PYBIND11_MODULE(_disfl, m) {
  m.doc() = "Disfluency synthesis, adversarial semi-supervised tagging and evaluation";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object cls = py::module_::import("disfl._errors").attr("DisflError");
      py::object exc = cls(std::string(to_string(e.code())), e.what());
      PyErr_SetObject(cls.ptr(), exc.ptr());
    }
  });

  m.def("normalize", &normalize, py::arg("text"), "Lower-cased, punctuation-free tokens.");
  m.def(
      "filter_fluent",
      [](const Tokens& tokens, const std::vector<int>& labels) { return filter_fluent(tokens, to_labels(labels)); },
      py::arg("tokens"), py::arg("labels"), "Tokens whose label is 0, in order.");
  m.def(
      "score",
      [](const std::vector<std::vector<int>>& gold, const std::vector<std::vector<int>>& pred) {
        std::vector<Labels> g, p;
        for (const auto& s : gold) g.push_back(to_labels(s));
        for (const auto& s : pred) p.push_back(to_labels(s));
        return report_dict(score(g, p));
      },
      py::arg("gold"), py::arg("pred"), "Micro-averaged token metrics for the disfluent class, in percent.");
  m.def("synthesize", &synthesize_sentences, py::arg("sentences"), py::kw_only(), py::arg("lexicon") = py::none(),
        py::arg("language") = "und", py::arg("out") = py::none(),
        "Injects disfluencies. Extra keyword settings use the config keys (budget, seed, type_weights, ...).");
  m.def("train", &train_files, py::arg("labeled"), py::arg("checkpoint"), py::kw_only(),
        py::arg("unlabeled") = py::none(),
        "Trains from corpus files and writes the checkpoint and <checkpoint>.vocab. Extra keyword settings use "
        "the config keys (mode, steps, seed, lr_d, ...).");
  m.def(
      "gradcheck",
      [](std::uint64_t seed, double h) {
        const LossGradCheck r = check_loss_gradients(seed, h);
        py::dict d;
        d["discriminator"] = r.discriminator.max_rel_error;
        d["generator"] = r.generator.max_rel_error;
        d["max_rel_error"] = r.max_rel_error;
        d["worst_param"] = r.worst_param;
        return d;
      },
      py::arg("seed") = 1, py::arg("step") = 1e-3, "Finite-difference check of both training losses.");

  py::class_<Model>(m, "Model")
      .def(py::init<const fs::path&, const std::optional<fs::path>&>(), py::arg("checkpoint"),
           py::arg("vocab") = py::none())
      .def("predict", &Model::predict, py::arg("sentences"), py::arg("jobs") = 1,
           "Per-token labels (1 = disfluent), truncated to the model's max length.")
      .def("correct", &Model::correct, py::arg("text"))
      .def("evaluate", &Model::evaluate, py::arg("test"), py::arg("jobs") = 1)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_property_readonly("mode", &Model::mode)
      .def_property_readonly("step", &Model::step)
      .def_property_readonly("vocab_size", &Model::vocab_size);
}
