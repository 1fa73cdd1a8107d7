#include "seqrec/inference.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

#include "seqrec/errors.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

namespace {

// (n)! saturating at `cap + 1`.
std::size_t factorial_capped(std::size_t n, std::size_t cap) {
  std::size_t f = 1;
  for (std::size_t k = 2; k <= n; ++k) {
    f *= k;
    if (f > cap) return cap + 1;
  }
  return f;
}

}  // namespace

OrderingPlan make_orderings(std::size_t n_instances, std::size_t query_index, std::size_t budget,
                            std::uint64_t seed) {
  if (n_instances < 1) throw ValidationError("make_orderings: photo has no instances");
  if (budget < 1) throw ValidationError("make_orderings: budget must be at least 1");
  if (query_index >= n_instances) {
    throw ValidationError("make_orderings: query index " + std::to_string(query_index) +
                          " out of range for " + std::to_string(n_instances) + " instances");
  }
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n_instances; ++i) {
    if (i != query_index) others.push_back(i);
  }

  OrderingPlan plan;
  plan.query_index = query_index;
  const std::size_t total = factorial_capped(others.size(), budget);
  if (total <= budget) {
    plan.exhaustive = true;
    do {
      std::vector<std::size_t> ordering = others;
      ordering.push_back(query_index);
      plan.orderings.push_back(std::move(ordering));
    } while (std::next_permutation(others.begin(), others.end()));
    return plan;
  }

  Rng rng = make_rng(seed, "orderings", query_index, n_instances);
  std::set<std::vector<std::size_t>> seen;
  while (plan.orderings.size() < budget) {
    std::shuffle(others.begin(), others.end(), rng);
    if (!seen.insert(others).second) continue;
    std::vector<std::size_t> ordering = others;
    ordering.push_back(query_index);
    plan.orderings.push_back(std::move(ordering));
  }
  return plan;
}

Distribution run_sequence(const ModelParams& params, const PhotoFeatures& photo,
                          std::span<const std::size_t> ordering) {
  if (ordering.empty()) throw ValidationError("run_sequence: empty ordering");
  LstmState state = LstmState::zeros(params.config.hidden_dim);
  if (params.config.use_scene) {
    state = lstm_step(params.lstm, state, scene_embed(params.embedding, photo.scene)).state;
  }
  Label previous = kStartLabel;
  Distribution dist;
  for (std::size_t idx : ordering) {
    if (idx >= photo.size()) throw ValidationError("run_sequence: ordering index out of range");
    Vector x = joint_embed(params.embedding, previous, photo.features[idx]);
    LstmStep step = lstm_step(params.lstm, state, x);
    dist = classify(params.classifier, step.output);
    previous = label_of(dist.argmax());
    state = std::move(step.state);
  }
  return dist;
}

InstancePrediction fuse_max(std::span<const Distribution> distributions) {
  if (distributions.empty()) throw ValidationError("fuse_max: no distributions");
  InstancePrediction out;
  out.fused.assign(distributions.front().probs().begin(), distributions.front().probs().end());
  for (const Distribution& d : distributions.subspan(1)) {
    if (d.dim() != out.fused.size()) throw ShapeError("fuse_max: vocabulary size mismatch");
    for (std::size_t i = 0; i < d.dim(); ++i) out.fused[i] = std::max(out.fused[i], d[i]);
  }
  out.label = label_of(argmax(out.fused));
  out.orderings_used = distributions.size();
  return out;
}

InstancePrediction predict_instance(const ModelParams& params, const PhotoFeatures& photo,
                                    std::size_t query_index, std::size_t budget,
                                    std::uint64_t seed) {
  const OrderingPlan plan = make_orderings(photo.size(), query_index, budget, seed);
  std::vector<Distribution> dists;
  dists.reserve(plan.orderings.size());
  for (const auto& ordering : plan.orderings) dists.push_back(run_sequence(params, photo, ordering));
  return fuse_max(dists);
}

PredictionResult predict_photo(const ModelParams& params, const PhotoFeatures& photo,
                               std::size_t budget, std::uint64_t seed) {
  if (photo.size() == 0) throw ValidationError("predict_photo: photo has no instances");
  PredictionResult result;
  for (std::size_t q = 0; q < photo.size(); ++q) {
    InstancePrediction p = predict_instance(params, photo, q, budget, seed);
    result.fused.push_back(std::move(p.fused));
    result.labels.push_back(p.label);
    result.orderings_used.push_back(p.orderings_used);
  }
  return result;
}

std::vector<PredictionResult> predict_all(const ModelParams& params,
                                          std::span<const PhotoFeatures> photos,
                                          std::size_t budget, std::uint64_t seed) {
  std::vector<PredictionResult> out;
  out.reserve(photos.size());
  for (const PhotoFeatures& photo : photos) {
    out.push_back(predict_photo(params, photo, budget, derive_seed(seed, photo.photo_id)));
  }
  return out;
}

const char* to_string(FusionMode mode) { return mode == FusionMode::Avg ? "avg" : "max"; }

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "avg") return FusionMode::Avg;
  if (text == "max") return FusionMode::Max;
  throw ConfigError("unknown fusion mode '" + std::string(text) + "' (expected avg|max)");
}

Vector fuse_region_scores(std::span<const Vector> region_scores, FusionMode mode) {
  if (region_scores.size() < 2) throw ValidationError("fuse_regions: need at least two regions");
  const std::size_t dim = region_scores.front().size();
  Vector out = region_scores.front();
  for (const Vector& s : region_scores.subspan(1)) {
    if (s.size() != dim) throw ValidationError("fuse_regions: vocabulary size mismatch");
    for (std::size_t i = 0; i < dim; ++i) {
      out[i] = mode == FusionMode::Avg ? out[i] + s[i] : std::max(out[i], s[i]);
    }
  }
  if (mode == FusionMode::Avg) {
    for (double& v : out) v /= static_cast<double>(region_scores.size());
  }
  return out;
}

Label fuse_regions(std::span<const Vector> region_scores, FusionMode mode) {
  return label_of(argmax(fuse_region_scores(region_scores, mode)));
}

std::vector<PredictionResult> fuse_region_predictions(
    std::span<const std::vector<PredictionResult>> per_region, FusionMode mode) {
  if (per_region.size() < 2) {
    throw ValidationError("fuse_region_predictions: need at least two regions");
  }
  const std::size_t photos = per_region.front().size();
  for (const auto& r : per_region) {
    if (r.size() != photos) throw ValidationError("fuse_region_predictions: photo count mismatch");
  }
  std::vector<PredictionResult> out(photos);
  for (std::size_t p = 0; p < photos; ++p) {
    const std::size_t n = per_region.front()[p].size();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Vector> scores;
      std::size_t used = 0;
      for (const auto& r : per_region) {
        if (r[p].size() != n) throw ValidationError("fuse_region_predictions: instance mismatch");
        scores.push_back(r[p].fused[i]);
        used += r[p].orderings_used[i];
      }
      Vector fused = fuse_region_scores(scores, mode);
      out[p].labels.push_back(label_of(argmax(fused)));
      out[p].fused.push_back(std::move(fused));
      out[p].orderings_used.push_back(used);
    }
  }
  return out;
}

}  // namespace seqrec
