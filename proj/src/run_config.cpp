#include "disfl/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "disfl/checkpoint.hpp"
#include "disfl/errors.hpp"
#include "disfl/textnorm.hpp"

namespace disfl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(ErrorCode::ConfigError, key + ": cannot parse '" + text + "'");
  return value;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  return parse_number<std::size_t>(key, text);
}

double parse_double(const std::string& key, const std::string& text) {
  // from_chars for double is available in libstdc++ 11.
  return parse_number<double>(key, text);
}

ConfigKey size_key(std::string name, std::string help, std::function<std::size_t&(RunConfig&)> field) {
  auto key = name;
  return {std::move(name), std::move(help),
          [key, field](RunConfig& c, const std::string& v) { field(c) = parse_size(key, v); }};
}

ConfigKey double_key(std::string name, std::string help, std::function<double&(RunConfig&)> field) {
  auto key = name;
  return {std::move(name), std::move(help),
          [key, field](RunConfig& c, const std::string& v) { field(c) = parse_double(key, v); }};
}

ConfigKey string_key(std::string name, std::string help, std::function<std::string&(RunConfig&)> field) {
  return {std::move(name), std::move(help), [field](RunConfig& c, const std::string& v) { field(c) = v; }};
}

std::vector<ConfigKey> make_keys() {
  std::vector<ConfigKey> k;
  // Synthesis.
  k.push_back(double_key("budget", "target DISFLUENT token fraction", [](RunConfig& c) -> double& {
    return c.synth.budget;
  }));
  k.push_back(size_key("max_injections", "injections per sentence at most",
                       [](RunConfig& c) -> std::size_t& { return c.synth.max_injections_per_sentence; }));
  k.push_back(size_key("stutter_max_fragments", "fragments per stutter at most",
                       [](RunConfig& c) -> std::size_t& { return c.synth.stutter_max_fragments; }));
  k.push_back({"type_weights",
               "7 comma-separated weights: filled pause, interjection, discourse marker, repetition, false start, "
               "edit, stutter",
               [](RunConfig& c, const std::string& v) {
                 std::stringstream in(v);
                 std::string item;
                 std::size_t i = 0;
                 while (std::getline(in, item, ',')) {
                   if (i >= kNumDisfluencyTypes) fail(ErrorCode::ConfigError, "type_weights: more than 7 values");
                   c.synth.type_weights[i++] = parse_double("type_weights", trim(item));
                 }
                 if (i != kNumDisfluencyTypes) fail(ErrorCode::ConfigError, "type_weights: expected 7 values");
               }});
  // Model.
  k.push_back(size_key("model_dim", "encoder width", [](RunConfig& c) -> std::size_t& {
    return c.model.encoder.model_dim;
  }));
  k.push_back(size_key("n_layers", "encoder layers", [](RunConfig& c) -> std::size_t& {
    return c.model.encoder.n_layers;
  }));
  k.push_back(size_key("n_heads", "attention heads", [](RunConfig& c) -> std::size_t& {
    return c.model.encoder.n_heads;
  }));
  k.push_back(size_key("max_len", "sentence length L", [](RunConfig& c) -> std::size_t& {
    return c.model.encoder.max_len;
  }));
  k.push_back(size_key("feedforward_dim", "encoder feed-forward width", [](RunConfig& c) -> std::size_t& {
    return c.model.encoder.feedforward_dim;
  }));
  k.push_back(size_key("noise_dim", "generator noise size", [](RunConfig& c) -> std::size_t& {
    return c.model.generator.noise_dim;
  }));
  k.push_back(size_key("generator_hidden", "generator hidden width", [](RunConfig& c) -> std::size_t& {
    return c.model.generator.hidden_dim;
  }));
  k.push_back(size_key("min_freq", "vocabulary frequency threshold", [](RunConfig& c) -> std::size_t& {
    return c.min_freq;
  }));
  // Training.
  k.push_back(size_key("steps", "training iterations", [](RunConfig& c) -> std::size_t& { return c.train.steps; }));
  k.push_back(size_key("batch_size_labeled", "labeled sentences per step", [](RunConfig& c) -> std::size_t& {
    return c.train.batch_size_labeled;
  }));
  k.push_back(size_key("batch_size_unlabeled", "unlabeled sentences per step", [](RunConfig& c) -> std::size_t& {
    return c.train.batch_size_unlabeled;
  }));
  k.push_back(double_key("lr_d", "encoder+discriminator learning rate", [](RunConfig& c) -> double& {
    return c.train.lr_d;
  }));
  k.push_back(double_key("lr_g", "generator learning rate", [](RunConfig& c) -> double& { return c.train.lr_g; }));
  k.push_back(size_key("eval_every", "held-out evaluation period (0 = off)", [](RunConfig& c) -> std::size_t& {
    return c.train.eval_every;
  }));
  k.push_back(double_key("feature_match_weight", "weight of the generator feature-matching term",
                         [](RunConfig& c) -> double& { return c.train.feature_match_weight; }));
  k.push_back({"mode", "supervised | adversarial | adversarial+unlabeled",
               [](RunConfig& c, const std::string& v) { c.train.mode = parse_train_mode(v); }});
  k.push_back({"seed", "master seed", [](RunConfig& c, const std::string& v) {
                 const auto seed = parse_number<std::uint64_t>("seed", v);
                 c.train.seed = seed;
                 c.synth.seed = seed;
               }});
  k.push_back(size_key("jobs", "worker threads for synthesis and evaluation", [](RunConfig& c) -> std::size_t& {
    return c.jobs;
  }));
  k.push_back(string_key("lang", "language tag", [](RunConfig& c) -> std::string& { return c.language; }));
  // Paths.
  k.push_back(string_key("in", "input file", [](RunConfig& c) -> std::string& { return c.input; }));
  k.push_back(string_key("out", "output file", [](RunConfig& c) -> std::string& { return c.output; }));
  k.push_back(string_key("lexicon", "lexicon file", [](RunConfig& c) -> std::string& { return c.lexicon; }));
  k.push_back(string_key("labeled", "labeled corpus", [](RunConfig& c) -> std::string& { return c.labeled; }));
  k.push_back(string_key("unlabeled", "unlabeled corpus", [](RunConfig& c) -> std::string& { return c.unlabeled; }));
  k.push_back(string_key("heldout", "held-out corpus for periodic evaluation",
                         [](RunConfig& c) -> std::string& { return c.heldout; }));
  k.push_back(string_key("test", "test corpus", [](RunConfig& c) -> std::string& { return c.test; }));
  k.push_back(string_key("checkpoint", "model checkpoint", [](RunConfig& c) -> std::string& { return c.checkpoint; }));
  k.push_back(string_key("history", "history CSV", [](RunConfig& c) -> std::string& { return c.history; }));
  k.push_back(string_key("vocab", "vocabulary file", [](RunConfig& c) -> std::string& { return c.vocab; }));
  k.push_back(string_key("report", "report path prefix", [](RunConfig& c) -> std::string& { return c.report; }));
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

const ConfigKey* find_config_key(std::string_view name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

void apply_setting(RunConfig& config, std::string_view key, const std::string& value) {
  const ConfigKey* k = find_config_key(key);
  if (!k) fail(ErrorCode::ConfigError, "unknown config key '" + std::string(key) + "'");
  k->set(config, value);
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (!find_config_key(key)) {
      fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": unknown config key '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

void apply_config_text(RunConfig& config, std::string_view text) {
  for (const auto& [key, value] : parse_config_text(text)) apply_setting(config, key, value);
}

std::filesystem::path resolve_config_path(const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) return env;
  return {};
}

std::vector<Tokens> read_sentences(const std::filesystem::path& path) {
  const std::string text = tc::read_file(path);
  std::vector<Tokens> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    Tokens tokens = normalize(std::string_view(text).substr(pos, nl - pos));
    if (!tokens.empty()) out.push_back(std::move(tokens));
    pos = nl + 1;
  }
  return out;
}

}  // namespace disfl
