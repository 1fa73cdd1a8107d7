#pragma once

// Test-time prediction. Each query instance is placed at the end of several
// orderings of its photo; intermediate steps feed their own argmax labels
// forward; the query distributions from all orderings are fused by an
// element-wise maximum before the final argmax.

#include <cstdint>
#include <span>
#include <vector>

#include "seqrec/data.hpp"
#include "seqrec/seqmodel.hpp"

namespace seqrec {

inline constexpr std::size_t kDefaultBudget = 24;

struct OrderingPlan {
  std::size_t query_index = 0;
  std::vector<std::vector<std::size_t>> orderings;  // each ends with query_index
  bool exhaustive = false;
};

/// All (n-1)! query-at-end orderings when that count fits in `budget`, otherwise
/// `budget` distinct uniformly sampled ones (seeded).
OrderingPlan make_orderings(std::size_t n_instances, std::size_t query_index, std::size_t budget,
                            std::uint64_t seed);

/// Runs one ordering with predicted-label feeding and returns the distribution at its last step.
Distribution run_sequence(const ModelParams& params, const PhotoFeatures& photo,
                          std::span<const std::size_t> ordering);

struct InstancePrediction {
  Vector fused;  // element-wise max envelope; not renormalized
  Label label = 0;
  std::size_t orderings_used = 0;
};

/// Element-wise max over the distributions; argmax with lowest-index ties.
InstancePrediction fuse_max(std::span<const Distribution> distributions);

InstancePrediction predict_instance(const ModelParams& params, const PhotoFeatures& photo,
                                    std::size_t query_index, std::size_t budget,
                                    std::uint64_t seed);

struct PredictionResult {
  std::vector<Vector> fused;
  std::vector<Label> labels;
  std::vector<std::size_t> orderings_used;

  std::size_t size() const { return labels.size(); }
};

PredictionResult predict_photo(const ModelParams& params, const PhotoFeatures& photo,
                               std::size_t budget, std::uint64_t seed);

std::vector<PredictionResult> predict_all(const ModelParams& params,
                                          std::span<const PhotoFeatures> photos,
                                          std::size_t budget, std::uint64_t seed);

enum class FusionMode { Avg, Max };

const char* to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view text);

/// Combines per-region score vectors for one instance; returns the winning label.
Label fuse_regions(std::span<const Vector> region_scores, FusionMode mode);
Vector fuse_region_scores(std::span<const Vector> region_scores, FusionMode mode);

/// Fuses whole prediction sets region-by-region (same photos, same order).
std::vector<PredictionResult> fuse_region_predictions(
    std::span<const std::vector<PredictionResult>> per_region, FusionMode mode);

}  // namespace seqrec
