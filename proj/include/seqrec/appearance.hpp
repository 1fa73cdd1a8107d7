#pragma once

// Appearance-only baseline: a linear softmax classifier over instance features,
// trained with the same Adam schedule and blind to every other instance and to
// the scene.

#include <span>

#include "seqrec/inference.hpp"
#include "seqrec/metrics.hpp"
#include "seqrec/training.hpp"

namespace seqrec {

struct AppearanceModel {
  ClassifierParams classifier;  // K x feature_dim

  std::size_t num_identities() const { return classifier.weights.rows(); }
  std::size_t feature_dim() const { return classifier.weights.cols(); }

  static AppearanceModel zeros(std::size_t num_identities, std::size_t feature_dim);

  friend bool operator==(const AppearanceModel&, const AppearanceModel&) = default;
};

struct AppearanceTrainResult {
  AppearanceModel model;
  TrainReport report;
};

/// Minibatches hold the instances of `batch_size` photos; the loss is the mean nll per instance.
AppearanceTrainResult train_appearance(std::span<const PhotoFeatures> photos,
                                       std::size_t num_identities, const TrainConfig& config);

PredictionResult predict_appearance(const AppearanceModel& model, const PhotoFeatures& photo);
std::vector<PredictionResult> predict_appearance_all(const AppearanceModel& model,
                                                     std::span<const PhotoFeatures> photos);

/// Trains on `train_split`, evaluates on `eval_split`. Every label in both splits must
/// belong to the shared vocabulary.
AccuracyMetrics appearance_only_train_eval(std::span<const PhotoRecord> train_split,
                                           std::span<const PhotoRecord> eval_split,
                                           const LabelVocabulary& vocab,
                                           const TrainConfig& config);

}  // namespace seqrec
