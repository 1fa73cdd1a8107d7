#include "seqrec/appearance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqrec/errors.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

AppearanceModel AppearanceModel::zeros(std::size_t num_identities, std::size_t feature_dim) {
  AppearanceModel m;
  m.classifier.weights = DenseMatrix(num_identities, feature_dim);
  m.classifier.bias.assign(num_identities, 0.0);
  return m;
}

AppearanceTrainResult train_appearance(std::span<const PhotoFeatures> photos,
                                       std::size_t num_identities, const TrainConfig& config) {
  config.validate();
  if (photos.empty()) throw ValidationError("train_appearance: empty dataset");
  if (num_identities < 1) throw ConfigError("train_appearance: no identities");
  const std::size_t feature_dim = photos.front().features.at(0).size();

  AppearanceTrainResult result{AppearanceModel::zeros(num_identities, feature_dim), TrainReport{}};
  ClassifierParams& params = result.model.classifier;
  Rng init = make_rng(config.seed, "appearance-init");
  std::uniform_real_distribution<double> uniform(-config.init_scale, config.init_scale);
  for (double& w : params.weights.values()) w = uniform(init);
  result.report.seed = config.seed;
  result.report.config = config;

  ClassifierParams grads{DenseMatrix(num_identities, feature_dim), Vector(num_identities, 0.0)};
  const std::size_t n_weights = params.weights.size();
  Vector flat(n_weights + num_identities);
  Vector gflat(flat.size());
  auto pack = [n_weights](const ClassifierParams& c, Vector& out) {
    std::copy(c.weights.values().begin(), c.weights.values().end(), out.begin());
    std::copy(c.bias.begin(), c.bias.end(), out.begin() + static_cast<std::ptrdiff_t>(n_weights));
  };
  pack(params, flat);
  AdamState adam = AdamState::for_size(flat.size(), config.learning_rate);

  std::vector<std::size_t> order(photos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.total_epochs; ++epoch) {
    adam.learning_rate = lr_schedule(config, epoch);
    Rng rng = make_rng(config.seed, "photo-order", epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::size_t count = 0;
      for (std::size_t k = start; k < stop; ++k) count += photos[order[k]].size();
      const double scale = 1.0 / static_cast<double>(count);
      grads.weights.fill(0.0);
      std::fill(grads.bias.begin(), grads.bias.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const PhotoFeatures& photo = photos[order[k]];
        for (std::size_t i = 0; i < photo.size(); ++i) {
          const Distribution dist = classify(params, photo.features[i]);
          const std::size_t target = class_of(photo.labels[i]);
          epoch_loss += nll(dist, target);
          classify_nll_backward(params, photo.features[i], dist, target, scale, grads);
        }
      }
      epoch_count += count;
      pack(grads, gflat);
      clip_gradients(gflat, config.clip_norm);
      adam_step(adam, flat, gflat);
      std::copy_n(flat.begin(), n_weights, params.weights.values().begin());
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(n_weights), flat.end(), params.bias.begin());
    }
    result.report.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_count));
  }
  return result;
}

PredictionResult predict_appearance(const AppearanceModel& model, const PhotoFeatures& photo) {
  PredictionResult out;
  for (const Vector& feat : photo.features) {
    const Distribution dist = classify(model.classifier, feat);
    out.labels.push_back(label_of(dist.argmax()));
    out.fused.emplace_back(dist.probs().begin(), dist.probs().end());
    out.orderings_used.push_back(1);
  }
  return out;
}

std::vector<PredictionResult> predict_appearance_all(const AppearanceModel& model,
                                                     std::span<const PhotoFeatures> photos) {
  std::vector<PredictionResult> out;
  out.reserve(photos.size());
  for (const PhotoFeatures& p : photos) out.push_back(predict_appearance(model, p));
  return out;
}

AccuracyMetrics appearance_only_train_eval(std::span<const PhotoRecord> train_split,
                                           std::span<const PhotoRecord> eval_split,
                                           const LabelVocabulary& vocab,
                                           const TrainConfig& config) {
  for (auto split : {train_split, eval_split}) {
    for (const PhotoRecord& p : split) {
      for (const Instance& inst : p.instances) {
        if (inst.label < 1 || inst.label > vocab.num_identities()) {
          throw ValidationError("photo '" + p.photo_id + "': label " + std::to_string(inst.label) +
                                " not in the shared vocabulary");
        }
      }
    }
  }
  const RegionSpec region = RegionSpec::parse(config.region);
  const auto train_features = extract_features(train_split, region);
  const auto eval_features = extract_features(eval_split, region);
  const AppearanceTrainResult trained =
      train_appearance(train_features, vocab.num_identities(), config);
  return evaluate(eval_split, predict_appearance_all(trained.model, eval_features));
}

}  // namespace seqrec
