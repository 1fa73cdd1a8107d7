#include "seqrec/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqrec/errors.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

const char* to_string(ModelKind kind) {
  return kind == ModelKind::Sequence ? "sequence" : "appearance";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "sequence") return ModelKind::Sequence;
  if (text == "appearance") return ModelKind::Appearance;
  throw ConfigError("unknown model kind '" + std::string(text) + "' (expected sequence|appearance)");
}

void TrainConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("embed_dim and hidden_dim must be positive");
  if (unroll < 1) throw ConfigError("unroll must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be positive");
  if (total_epochs > 0 && decay_epoch >= total_epochs) {
    throw ConfigError("decay_epoch must be smaller than total_epochs");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be nonnegative");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be nonnegative");
  RegionSpec::parse(region);
}

double lr_schedule(const TrainConfig& config, std::size_t epoch) {
  if (epoch >= config.total_epochs) {
    throw ValidationError("lr_schedule: epoch " + std::to_string(epoch) + " outside 0.." +
                          std::to_string(config.total_epochs) + ")");
  }
  return epoch < config.decay_epoch ? config.learning_rate
                                    : config.learning_rate / config.decay_factor;
}

SequenceItem shuffle_photo(const PhotoFeatures& photo, std::size_t pad_to, std::uint64_t seed,
                           std::uint64_t epoch) {
  if (photo.size() == 0) throw ValidationError("photo '" + photo.photo_id + "' has no instances");
  std::vector<std::size_t> perm(photo.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, "instance-order", epoch, fnv1a(photo.photo_id));
  std::shuffle(perm.begin(), perm.end(), rng);

  SequenceItem item;
  item.scene = photo.scene;
  item.pad_to = pad_to;
  item.features.reserve(perm.size());
  item.labels.reserve(perm.size());
  for (std::size_t i : perm) {
    item.features.push_back(photo.features[i]);
    item.labels.push_back(photo.labels[i]);
  }
  return item;
}

ModelConfig model_config_for(const TrainConfig& config, std::size_t num_identities,
                             std::size_t feature_dim, std::size_t scene_dim) {
  ModelConfig mc;
  mc.num_identities = num_identities;
  mc.feature_dim = feature_dim;
  mc.scene_dim = scene_dim;
  mc.embed_dim = config.embed_dim;
  mc.hidden_dim = config.hidden_dim;
  mc.mode = config.mode;
  mc.use_scene = config.use_scene;
  return mc;
}

double clip_gradients(std::span<double> grads, double max_norm) {
  const double norm = std::sqrt(squared_norm(grads));
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grads) g *= s;
  }
  return norm;
}

TrainResult train_features(std::span<const PhotoFeatures> photos, std::size_t num_identities,
                           const TrainConfig& config, const EpochHook& hook) {
  config.validate();
  if (photos.empty()) throw ValidationError("train: empty dataset");
  for (const PhotoFeatures& p : photos) {
    if (p.size() > config.unroll) {
      throw ConfigError("photo '" + p.photo_id + "' has " + std::to_string(p.size()) +
                        " instances, more than the unroll length " + std::to_string(config.unroll));
    }
  }
  const ModelConfig mc = model_config_for(config, num_identities, photos.front().features.at(0).size(),
                                          photos.front().scene.size());
  TrainResult result{ModelParams::initialize(mc, derive_seed(config.seed, "init"), config.init_scale),
                     TrainReport{}};
  ModelParams& params = result.params;
  TrainReport& report = result.report;
  report.seed = config.seed;
  report.config = config;

  ModelParams grads = params.zeros_like();
  Vector flat = params.flatten();
  AdamState adam = AdamState::for_size(flat.size(), config.learning_rate);
  const ForwardOptions options{config.feed_predicted};

  std::vector<std::size_t> order(photos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.total_epochs; ++epoch) {
    adam.learning_rate = lr_schedule(config, epoch);
    Rng rng = make_rng(config.seed, "photo-order", epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::size_t batch_steps = 0;
      for (std::size_t k = start; k < stop; ++k) batch_steps += photos[order[k]].size();
      const double scale = 1.0 / static_cast<double>(batch_steps);

      grads.set_zero();
      for (std::size_t k = start; k < stop; ++k) {
        const SequenceItem item = shuffle_photo(photos[order[k]], config.unroll, config.seed, epoch);
        const ForwardTrace trace = forward_train(params, item, options);
        epoch_loss += trace.loss;
        accumulate_gradients(params, trace, grads, scale);
      }
      epoch_steps += batch_steps;

      Vector g = grads.flatten();
      clip_gradients(g, config.clip_norm);
      adam_step(adam, flat, g);
      params.assign(flat);
    }
    const double mean_loss = epoch_loss / static_cast<double>(epoch_steps);
    if (!std::isfinite(mean_loss)) {
      throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
    }
    report.epoch_loss.push_back(mean_loss);
    if (hook) {
      if (auto acc = hook(params, epoch)) report.epoch_eval_accuracy.push_back(*acc);
    }
  }
  return result;
}

TrainResult train(std::span<const PhotoRecord> photos, std::size_t num_identities,
                  const TrainConfig& config, const EpochHook& hook) {
  config.validate();
  const std::vector<PhotoFeatures> features =
      extract_features(photos, RegionSpec::parse(config.region));
  return train_features(features, num_identities, config, hook);
}

}  // namespace seqrec
