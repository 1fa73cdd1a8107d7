#pragma once

// Flat key=value experiment configuration. One key per field; '#' starts a
// comment; blank lines are ignored. The same keys are accepted as CLI
// overrides (--set key=value), which take precedence over the file.
//
// Generator keys:  num_identities num_groups num_scenes feature_dim
//                  scene_feature_dim prototype_scale noise_scale scene_noise_scale
//                  co_occurrence_strength scene_affinity_strength photos_per_split
//                  min_instances max_instances regions (comma list)
// Training keys:   embed_dim hidden_dim unroll learning_rate decay_factor decay_epoch
//                  total_epochs (alias: epochs) batch_size embedding_mode (addition|max)
//                  use_scene model (sequence|appearance) region (name or a+b)
//                  init_scale clip_norm feed_predicted train_split (0|1)
// Evaluation keys: budget fusion (avg|max) eval_split (0|1)
// Gradcheck keys:  gradcheck_dim gradcheck_seeds gradcheck_corrupt gradcheck_zero_init
// Shared:          seed

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqrec/inference.hpp"
#include "seqrec/synthetic.hpp"
#include "seqrec/training.hpp"

namespace seqrec {

struct EvalConfig {
  std::size_t budget = kDefaultBudget;
  FusionMode fusion = FusionMode::Avg;
  std::optional<int> eval_split;  // defaults to the split the model was not trained on
};

struct GradcheckConfig {
  std::size_t dim = 6;
  std::size_t seeds = 10;
  std::string corrupt;  // negative-control hook: name of a check whose gradient is perturbed
  bool zero_init = false;
};

struct ExperimentConfig {
  GenConfig gen;
  TrainConfig train;
  EvalConfig eval;
  GradcheckConfig gradcheck;
  int train_split = 0;
  std::uint64_t seed = 1;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses "key = value" lines; errors carry `source` and the line number.
KeyValues parse_key_values(std::string_view text, std::string_view source);
KeyValues load_key_values(const std::filesystem::path& path);
/// Splits "key=value".
std::pair<std::string, std::string> parse_override(std::string_view text);

/// Applies one key; throws ConfigError for unknown keys or malformed values.
void apply_key(ExperimentConfig& config, const std::string& key, const std::string& value);
ExperimentConfig make_config(const KeyValues& values);

bool is_known_key(std::string_view key);
const std::vector<std::string>& known_keys();

/// Every key with its effective value, one "key = value" per line.
std::string describe(const ExperimentConfig& config);

}  // namespace seqrec
