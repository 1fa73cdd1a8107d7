#include "seqrec/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "seqrec/errors.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

void GenConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(co_occurrence_strength) || !in_unit(scene_affinity_strength)) {
    throw ValidationError("gen: strengths must lie in [0,1]");
  }
  if (feature_dim < 2 || scene_feature_dim < 2) throw ValidationError("gen: dimensions must be >= 2");
  if (num_identities < 1) throw ValidationError("gen: num_identities must be positive");
  if (num_groups < 1 || num_groups > num_identities) {
    throw ValidationError("gen: num_groups must lie in [1, num_identities]");
  }
  if (num_scenes < 1) throw ValidationError("gen: num_scenes must be positive");
  if (photos_per_split < 1) throw ValidationError("gen: photos_per_split must be positive");
  if (min_instances < 1 || min_instances > max_instances) {
    throw ValidationError("gen: need 1 <= min_instances <= max_instances");
  }
  if (max_instances > num_identities) {
    throw ValidationError("gen: max_instances exceeds num_identities (identities never repeat in a photo)");
  }
  if (co_occurrence_strength == 1.0 && num_identities / num_groups < max_instances) {
    throw ValidationError("gen: groups too small to fill a photo from a single group");
  }
  if (!(noise_scale >= 0.0) || !(scene_noise_scale >= 0.0) || !(prototype_scale >= 0.0)) {
    throw ValidationError("gen: scales must be nonnegative");
  }
  if (regions.empty()) throw ValidationError("gen: at least one region is required");
  for (const std::string& r : regions) {
    if (r.empty() || r.find('+') != std::string::npos || r == kConcatRegion) {
      throw ValidationError("gen: invalid region name '" + r + "'");
    }
  }
}

namespace {

Vector gaussian_vector(std::size_t dim, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (double& x : v) x = scale * normal(rng);
  return v;
}

Vector noisy(const Vector& prototype, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v = prototype;
  for (double& x : v) x += scale * normal(rng);
  return v;
}

template <typename T>
T pick(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> idx(0, items.size() - 1);
  return items[idx(rng)];
}

std::string identity_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "id_%03zu", k);
  return buf;
}

std::string photo_name(int split, std::size_t p) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "s%d_p%05zu", split, p);
  return buf;
}

}  // namespace

SyntheticWorld generate_synthetic(const GenConfig& config) {
  config.validate();
  const std::size_t k = config.num_identities;

  std::vector<std::string> names;
  for (std::size_t i = 1; i <= k; ++i) names.push_back(identity_name(i));
  SyntheticWorld world{SplitPair{}, LabelVocabulary(names), GenMetadata{}};
  GenMetadata& meta = world.metadata;

  Rng world_rng = make_rng(config.seed, "gen-world");
  std::vector<Label> identities(k);
  std::iota(identities.begin(), identities.end(), Label{1});
  std::shuffle(identities.begin(), identities.end(), world_rng);
  meta.groups.assign(config.num_groups, {});
  meta.identity_group.assign(k + 1, 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t g = i % config.num_groups;
    meta.groups[g].push_back(identities[i]);
    meta.identity_group[identities[i]] = g;
  }
  for (auto& members : meta.groups) std::sort(members.begin(), members.end());
  std::vector<std::vector<std::size_t>> scene_groups(config.num_scenes);
  for (std::size_t g = 0; g < config.num_groups; ++g) {
    meta.group_scene.push_back(g % config.num_scenes);
    scene_groups[g % config.num_scenes].push_back(g);
  }

  // prototypes[region][label]
  std::vector<std::vector<Vector>> prototypes(config.regions.size());
  for (std::size_t r = 0; r < config.regions.size(); ++r) {
    Rng rng = make_rng(config.seed, "gen-prototypes", r);
    prototypes[r].push_back(Vector{});
    for (std::size_t i = 1; i <= k; ++i) {
      prototypes[r].push_back(gaussian_vector(config.feature_dim, config.prototype_scale, rng));
    }
  }
  std::vector<Vector> scene_prototypes;
  {
    Rng rng = make_rng(config.seed, "gen-scenes");
    for (std::size_t s = 0; s < config.num_scenes; ++s) {
      scene_prototypes.push_back(gaussian_vector(config.scene_feature_dim, config.prototype_scale, rng));
    }
  }

  std::vector<std::size_t> all_groups(config.num_groups);
  std::iota(all_groups.begin(), all_groups.end(), std::size_t{0});
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> scene_draw(0, config.num_scenes - 1);
  std::uniform_int_distribution<std::size_t> size_draw(config.min_instances, config.max_instances);

  meta.photo_scene.assign(2, {});
  meta.photo_group.assign(2, {});
  for (int split = 0; split < 2; ++split) {
    std::vector<PhotoRecord>& photos = split == 0 ? world.splits.set_0 : world.splits.set_1;
    for (std::size_t p = 0; p < config.photos_per_split; ++p) {
      Rng rng = make_rng(config.seed, "gen-photo", static_cast<std::uint64_t>(split), p);
      const std::size_t scene = scene_draw(rng);
      const bool follow_scene = coin(rng) < config.scene_affinity_strength;
      const std::size_t group = follow_scene && !scene_groups[scene].empty()
                                    ? pick(scene_groups[scene], rng)
                                    : pick(all_groups, rng);
      const std::size_t n = size_draw(rng);

      std::vector<Label> chosen;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<Label> in_group, anyone;
        for (Label id = 1; id <= k; ++id) {
          if (std::find(chosen.begin(), chosen.end(), id) != chosen.end()) continue;
          anyone.push_back(id);
          if (meta.identity_group[id] == group) in_group.push_back(id);
        }
        const bool from_group = coin(rng) < config.co_occurrence_strength && !in_group.empty();
        chosen.push_back(pick(from_group ? in_group : anyone, rng));
      }

      PhotoRecord photo;
      photo.photo_id = photo_name(split, p);
      photo.scene = noisy(scene_prototypes[scene], config.scene_noise_scale, rng);
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        Instance inst;
        inst.instance_id = photo.photo_id + "_i" + std::to_string(i);
        inst.label = chosen[i];
        for (std::size_t r = 0; r < config.regions.size(); ++r) {
          inst.regions.emplace(config.regions[r],
                               noisy(prototypes[r][chosen[i]], config.noise_scale, rng));
        }
        photo.instances.push_back(std::move(inst));
      }
      meta.photo_scene[split].push_back(scene);
      meta.photo_group[split].push_back(group);
      photos.push_back(std::move(photo));
    }
  }
  return world;
}

nlohmann::json to_json(const GenConfig& c) {
  return {{"num_identities", c.num_identities},
          {"num_groups", c.num_groups},
          {"num_scenes", c.num_scenes},
          {"feature_dim", c.feature_dim},
          {"scene_feature_dim", c.scene_feature_dim},
          {"prototype_scale", c.prototype_scale},
          {"noise_scale", c.noise_scale},
          {"scene_noise_scale", c.scene_noise_scale},
          {"co_occurrence_strength", c.co_occurrence_strength},
          {"scene_affinity_strength", c.scene_affinity_strength},
          {"photos_per_split", c.photos_per_split},
          {"min_instances", c.min_instances},
          {"max_instances", c.max_instances},
          {"regions", c.regions},
          {"seed", c.seed}};
}

nlohmann::json to_json(const GenMetadata& m) {
  return {{"groups", m.groups}, {"group_scene", m.group_scene}};
}

}  // namespace seqrec
