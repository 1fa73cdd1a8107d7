#pragma once

// Accuracy over all instances, over instances from multi-instance photos and
// over instances from single-instance photos, per protocol direction and averaged.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqrec/data.hpp"
#include "seqrec/inference.hpp"

namespace seqrec {

struct AccuracyMetrics {
  std::size_t count_overall = 0;
  std::size_t correct_overall = 0;
  std::size_t count_multi = 0;
  std::size_t correct_multi = 0;
  std::size_t count_single = 0;
  std::size_t correct_single = 0;

  double acc_overall() const;
  /// Absent when no instance falls in the category.
  std::optional<double> acc_multi() const;
  std::optional<double> acc_single() const;
};

/// `truth[p]` lists the true labels of photo p in stored order; predictions must
/// cover every instance exactly once.
AccuracyMetrics evaluate(std::span<const std::vector<Label>> truth,
                         std::span<const PredictionResult> predictions);
AccuracyMetrics evaluate(std::span<const PhotoRecord> truth,
                         std::span<const PredictionResult> predictions);

struct DirectionMetrics {
  std::string name;  // e.g. "0->1": trained on set_0, evaluated on set_1
  AccuracyMetrics metrics;
};

struct MetricsReport {
  std::string method;
  std::string region;
  std::string fusion;  // "none" for a single model
  std::size_t num_identities = 0;
  std::uint64_t vocab_fingerprint = 0;
  std::vector<DirectionMetrics> directions;
  // Means over directions (over the directions where the metric is defined).
  double acc_overall = 0.0;
  std::optional<double> acc_multi;
  std::optional<double> acc_single;
};

MetricsReport combine_directions(std::vector<DirectionMetrics> directions);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

}  // namespace seqrec
