#pragma once

// The per-photo recurrent model. An optional scene step seeds the LSTM from
// the global scene feature; each following step consumes the joint embedding of
// the previous identity label and the current instance feature and emits a
// distribution over identities. The training loss is the summed negative
// log-likelihood of the true labels.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "seqrec/layers.hpp"

namespace seqrec {

struct ModelConfig {
  std::size_t num_identities = 0;
  std::size_t feature_dim = 0;
  std::size_t scene_dim = 0;
  std::size_t embed_dim = 512;
  std::size_t hidden_dim = 512;
  EmbedMode mode = EmbedMode::ElementwiseMax;
  bool use_scene = true;

  std::size_t label_vocab_dim() const { return num_identities + 1; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamBlock {
  std::string_view name;
  std::span<double> values;
  std::size_t rows;
  std::size_t cols;
};

struct ModelParams {
  ModelConfig config;
  EmbeddingParams embedding;
  LstmParams lstm;
  ClassifierParams classifier;

  static ModelParams zeros(const ModelConfig& config);
  /// Uniform [-init_scale, init_scale] weights, zero biases except the forget gate (1.0).
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed,
                                double init_scale = 0.08);

  /// Every learnable array in a fixed order; this order defines the flat layout.
  std::vector<ParamBlock> blocks();
  std::size_t parameter_count() const;
  Vector flatten() const;
  void assign(std::span<const double> flat);
  void set_zero();
  ModelParams zeros_like() const { return zeros(config); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// One photo prepared for a training pass: instances already in sequence order.
struct SequenceItem {
  Vector scene;
  std::vector<Vector> features;
  std::vector<Label> labels;
  std::size_t pad_to = 22;

  std::size_t size() const { return labels.size(); }
};

struct ForwardOptions {
  /// Feed the argmax of the previous step instead of the true previous label.
  bool feed_predicted = false;
};

struct ForwardTrace {
  std::vector<Distribution> distributions;  // one per real instance
  std::vector<Label> targets;
  std::vector<Label> fed_labels;
  bool has_scene_step = false;
  SceneCache scene_cache;
  std::vector<EmbedCache> embed_caches;
  std::vector<LstmCache> lstm_caches;  // scene step first when present
  std::vector<Vector> outputs;         // z_t per real instance
  double loss = 0.0;
};

ForwardTrace forward_train(const ModelParams& params, const SequenceItem& item,
                           const ForwardOptions& options = {});

/// Accumulates scale * dLoss/dParams into `grads`.
void accumulate_gradients(const ModelParams& params, const ForwardTrace& trace, ModelParams& grads,
                          double scale = 1.0);

/// Exact gradient of trace.loss with respect to every parameter.
ModelParams backward_train(const ModelParams& params, const ForwardTrace& trace);

/// Sum over steps of log p(y_t | y_<t, b_<=t, I).
double log_likelihood(const ModelParams& params, const SequenceItem& item);

}  // namespace seqrec
