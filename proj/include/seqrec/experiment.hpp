#pragma once

// The evaluation protocol shared by `eval`, `ablate` and the acceptance suite:
// train on one split, evaluate on the other, in both directions, and average.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "seqrec/checkpoint.hpp"
#include "seqrec/data.hpp"
#include "seqrec/inference.hpp"
#include "seqrec/metrics.hpp"
#include "seqrec/training.hpp"

namespace seqrec {

enum class Method { AppearanceOnly, OursRelation, Ours };

const char* to_string(Method method);
Method parse_method(std::string_view text);
inline constexpr Method kAllMethods[] = {Method::AppearanceOnly, Method::OursRelation, Method::Ours};

/// `base` with the model kind and scene switch that define `method`.
TrainConfig config_for(Method method, TrainConfig base);

struct TrainedModel {
  Checkpoint checkpoint;
  TrainReport report;
};

/// The method a trained checkpoint implements.
Method method_of(const Checkpoint& checkpoint);

nlohmann::json to_json(const TrainReport& report);

/// Trains whichever model `config.model` names on `photos`, using `config.region`.
TrainedModel train_model(std::span<const PhotoRecord> photos, const LabelVocabulary& vocab,
                         const TrainConfig& config, int train_split);

struct DirectionRun {
  std::string name;  // "0->1" or "1->0"
  TrainedModel model;
  std::vector<PredictionResult> predictions;  // on the held split
  AccuracyMetrics metrics;
};

struct ProtocolResult {
  Method method;
  std::vector<DirectionRun> runs;
  MetricsReport report;
};

/// Both protocol directions for one method.
ProtocolResult run_protocol(const SplitPair& splits, const LabelVocabulary& vocab,
                            const TrainConfig& config, Method method, std::size_t budget);

/// Fuses per-region protocol results direction by direction. All results must share
/// the method and splits.
MetricsReport fuse_protocols(std::span<const ProtocolResult> per_region, const SplitPair& splits,
                             const LabelVocabulary& vocab, FusionMode mode);

/// Appearance-only, Ours-relation and Ours under the same config.
std::vector<MetricsReport> run_ablation(const SplitPair& splits, const LabelVocabulary& vocab,
                                        const TrainConfig& config, std::size_t budget);

/// Three rows (methods) by three columns (overall / multi / single), in percent.
std::string format_ablation(std::span<const MetricsReport> rows);
nlohmann::json ablation_to_json(std::span<const MetricsReport> rows);

}  // namespace seqrec
