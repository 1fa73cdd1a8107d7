#pragma once

// Synthetic photo albums with controllable contextual structure. Identities are
// partitioned into social groups, each group prefers one scene. A photo draws a
// scene, then a group (biased toward the scene's groups), then distinct
// identities (biased toward the group). Instance features are per-region identity
// prototypes plus Gaussian noise; scene features are scene prototypes plus noise.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqrec/data.hpp"

namespace seqrec {

struct GenConfig {
  std::size_t num_identities = 40;
  std::size_t num_groups = 8;
  std::size_t num_scenes = 8;
  std::size_t feature_dim = 16;
  std::size_t scene_feature_dim = 16;
  double prototype_scale = 1.0;
  double noise_scale = 1.0;
  double scene_noise_scale = 1.0;
  double co_occurrence_strength = 0.9;
  double scene_affinity_strength = 0.0;
  std::size_t photos_per_split = 500;
  std::size_t min_instances = 1;
  std::size_t max_instances = 4;
  std::vector<std::string> regions = {"head"};
  std::uint64_t seed = 1;

  void validate() const;
};

struct GenMetadata {
  std::vector<std::vector<Label>> groups;  // identities of each group
  std::vector<std::size_t> group_scene;    // preferred scene of each group
  std::vector<std::size_t> identity_group;  // indexed by label; entry 0 unused
  // Per split, per photo: the drawn scene and group.
  std::vector<std::vector<std::size_t>> photo_scene;
  std::vector<std::vector<std::size_t>> photo_group;
};

struct SyntheticWorld {
  SplitPair splits;
  LabelVocabulary vocab;
  GenMetadata metadata;
};

SyntheticWorld generate_synthetic(const GenConfig& config);

nlohmann::json to_json(const GenConfig& config);
nlohmann::json to_json(const GenMetadata& metadata);

}  // namespace seqrec
