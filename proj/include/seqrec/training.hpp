#pragma once

// Training loop: every epoch re-shuffles photo order and the instance order
// inside each photo, then runs minibatched Adam on the summed per-step negative
// log-likelihood with a one-step learning-rate decay.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqrec/data.hpp"
#include "seqrec/seqmodel.hpp"

namespace seqrec {

enum class ModelKind { Sequence, Appearance };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct TrainConfig {
  std::size_t embed_dim = 512;
  std::size_t hidden_dim = 512;
  std::size_t unroll = 22;
  double learning_rate = 0.001;
  double decay_factor = 10.0;
  std::size_t decay_epoch = 20;
  std::size_t total_epochs = 80;
  std::size_t batch_size = 16;
  EmbedMode mode = EmbedMode::ElementwiseMax;
  bool use_scene = true;
  ModelKind model = ModelKind::Sequence;
  std::string region = "head";
  double init_scale = 0.08;
  double clip_norm = 0.0;  // 0 disables clipping
  bool feed_predicted = false;
  std::uint64_t seed = 1;

  void validate() const;
};

/// learning_rate before decay_epoch, learning_rate / decay_factor from it on.
double lr_schedule(const TrainConfig& config, std::size_t epoch);

/// Applies one seeded permutation jointly to features and labels. The permutation
/// depends on (seed, epoch, photo id) only.
SequenceItem shuffle_photo(const PhotoFeatures& photo, std::size_t pad_to, std::uint64_t seed,
                           std::uint64_t epoch);

struct TrainReport {
  std::vector<double> epoch_loss;  // mean nll per contributing step
  std::vector<double> epoch_eval_accuracy;
  std::uint64_t seed = 0;
  TrainConfig config;
  std::string checkpoint;
};

/// Called after every epoch; the returned accuracy (if any) is recorded.
using EpochHook = std::function<std::optional<double>(const ModelParams&, std::size_t epoch)>;

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

TrainResult train(std::span<const PhotoRecord> photos, std::size_t num_identities,
                  const TrainConfig& config, const EpochHook& hook = {});

/// Same loop over already-extracted features.
TrainResult train_features(std::span<const PhotoFeatures> photos, std::size_t num_identities,
                           const TrainConfig& config, const EpochHook& hook = {});

ModelConfig model_config_for(const TrainConfig& config, std::size_t num_identities,
                             std::size_t feature_dim, std::size_t scene_dim);

/// Rescales `grads` so its L2 norm is at most max_norm; returns the norm before clipping.
double clip_gradients(std::span<double> grads, double max_norm);

}  // namespace seqrec
