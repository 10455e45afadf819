#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "disfl/seqgan.hpp"
#include "disfl/synth.hpp"
#include "disfl/trainer.hpp"

namespace disfl {

/// Everything a command may need; filled from defaults, then a config
/// file, then flags.
struct RunConfig {
  SynthConfig synth;
  model::ModelConfig model;
  TrainConfig train;
  std::size_t min_freq = 1;
  std::size_t jobs = 1;
  std::string language = "und";

  std::string input;
  std::string output;
  std::string lexicon;
  std::string labeled;
  std::string unlabeled;
  std::string heldout;
  std::string test;
  std::string checkpoint;
  std::string history;
  std::string vocab;
  std::string report;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
};

/// Every accepted key, e.g. "steps", "lr_d", "type_weights" (7 comma-separated numbers).
const std::vector<ConfigKey>& config_keys();
const ConfigKey* find_config_key(std::string_view name);

/// Sets one key; CONFIG_ERROR for unknown keys or unparsable values.
void apply_setting(RunConfig& config, std::string_view key, const std::string& value);

/// `key = value` lines, '#' comments, blank lines ignored. Unknown keys are
/// rejected with the line number.
std::map<std::string, std::string> parse_config_text(std::string_view text);
void apply_config_text(RunConfig& config, std::string_view text);

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "DISFL_CONFIG";

/// `explicit_path` if given, else $DISFL_CONFIG if set, else empty.
std::filesystem::path resolve_config_path(const std::string& explicit_path);

/// Fluent input: one sentence per line, normalized; blank lines skipped.
std::vector<Tokens> read_sentences(const std::filesystem::path& path);

}  // namespace disfl
