#include "seqrec/seqmodel.hpp"

#include <algorithm>
#include <string>

#include "seqrec/errors.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

namespace {

void randomize(std::span<double> values, Rng& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : values) v = dist(rng);
}

template <typename Params>
std::vector<ParamBlock> collect_blocks(Params& p) {
  auto matrix = [](std::string_view name, auto& m) {
    return ParamBlock{name, m.values(), m.rows(), m.cols()};
  };
  auto vector = [](std::string_view name, auto& v) {
    return ParamBlock{name, std::span<double>(v), v.size(), 1};
  };
  return {
      matrix("embedding.label", p.embedding.label_embed),
      matrix("embedding.feature", p.embedding.feature_embed),
      matrix("embedding.scene", p.embedding.scene_embed),
      matrix("lstm.input_weights", p.lstm.input_weights),
      matrix("lstm.hidden_weights", p.lstm.hidden_weights),
      vector("lstm.bias", p.lstm.bias),
      matrix("classifier.weights", p.classifier.weights),
      vector("classifier.bias", p.classifier.bias),
  };
}

}  // namespace

void ModelConfig::validate() const {
  if (num_identities < 1) throw ConfigError("model needs at least one identity");
  if (feature_dim < 1 || embed_dim < 1 || hidden_dim < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (use_scene && scene_dim < 1) throw ConfigError("use_scene requires a positive scene dimension");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  const std::size_t e = config.embed_dim;
  const std::size_t h = config.hidden_dim;
  ModelParams p;
  p.config = config;
  p.embedding.label_embed = DenseMatrix(e, config.label_vocab_dim());
  p.embedding.feature_embed = DenseMatrix(e, config.feature_dim);
  p.embedding.scene_embed = DenseMatrix(e, std::max<std::size_t>(config.scene_dim, 1));
  p.embedding.mode = config.mode;
  p.lstm.input_weights = DenseMatrix(4 * h, e);
  p.lstm.hidden_weights = DenseMatrix(4 * h, h);
  p.lstm.bias.assign(4 * h, 0.0);
  p.classifier.weights = DenseMatrix(config.num_identities, h);
  p.classifier.bias.assign(config.num_identities, 0.0);
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed,
                                    double init_scale) {
  ModelParams p = zeros(config);
  Rng rng = make_rng(seed, "model-init");
  randomize(p.embedding.label_embed.values(), rng, init_scale);
  randomize(p.embedding.feature_embed.values(), rng, init_scale);
  randomize(p.embedding.scene_embed.values(), rng, init_scale);
  randomize(p.lstm.input_weights.values(), rng, init_scale);
  randomize(p.lstm.hidden_weights.values(), rng, init_scale);
  randomize(p.classifier.weights.values(), rng, init_scale);
  const std::size_t h = config.hidden_dim;
  std::fill(p.lstm.bias.begin() + static_cast<std::ptrdiff_t>(h),
            p.lstm.bias.begin() + static_cast<std::ptrdiff_t>(2 * h), 1.0);
  return p;
}

std::vector<ParamBlock> ModelParams::blocks() { return collect_blocks(*this); }

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const ParamBlock& b : collect_blocks(const_cast<ModelParams&>(*this))) n += b.values.size();
  return n;
}

Vector ModelParams::flatten() const {
  Vector flat;
  flat.reserve(parameter_count());
  for (const ParamBlock& b : collect_blocks(const_cast<ModelParams&>(*this))) {
    flat.insert(flat.end(), b.values.begin(), b.values.end());
  }
  return flat;
}

void ModelParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("ModelParams::assign: expected " + std::to_string(parameter_count()) +
                     " values, got " + std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  for (ParamBlock& b : blocks()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), b.values.size(),
                b.values.begin());
    offset += b.values.size();
  }
}

void ModelParams::set_zero() {
  for (ParamBlock& b : blocks()) std::fill(b.values.begin(), b.values.end(), 0.0);
}

namespace {

void validate_item(const ModelConfig& config, const SequenceItem& item) {
  const std::size_t n = item.size();
  if (n == 0) throw ValidationError("sequence item has no instances");
  if (item.features.size() != n) {
    throw ValidationError("sequence item: feature and label counts differ");
  }
  if (n > item.pad_to) {
    throw ValidationError("sequence item: " + std::to_string(n) +
                          " instances exceed the unroll length " + std::to_string(item.pad_to));
  }
  for (Label y : item.labels) {
    if (y < 1 || y > config.num_identities) {
      throw ValidationError("label " + std::to_string(y) + " outside vocabulary 1.." +
                            std::to_string(config.num_identities));
    }
  }
  if (config.use_scene && item.scene.size() != config.scene_dim) {
    throw ShapeError("scene feature has dimension " + std::to_string(item.scene.size()) +
                     ", model expects " + std::to_string(config.scene_dim));
  }
}

}  // namespace

ForwardTrace forward_train(const ModelParams& params, const SequenceItem& item,
                           const ForwardOptions& options) {
  validate_item(params.config, item);
  const std::size_t n = item.size();
  ForwardTrace trace;
  trace.targets = item.labels;
  trace.has_scene_step = params.config.use_scene;
  trace.distributions.reserve(n);
  trace.embed_caches.resize(n);
  trace.lstm_caches.resize(n + (trace.has_scene_step ? 1 : 0));
  trace.outputs.reserve(n);
  trace.fed_labels.reserve(n);

  LstmState state = LstmState::zeros(params.config.hidden_dim);
  std::size_t cache_index = 0;
  if (trace.has_scene_step) {
    Vector x = scene_embed(params.embedding, item.scene, &trace.scene_cache);
    state = lstm_step(params.lstm, state, x, &trace.lstm_caches[cache_index++]).state;
  }

  // Steps past n are padding: they are never run, so they add no loss and no gradient.
  Label previous = kStartLabel;
  for (std::size_t t = 0; t < n; ++t) {
    trace.fed_labels.push_back(previous);
    Vector x = joint_embed(params.embedding, previous, item.features[t], &trace.embed_caches[t]);
    LstmStep step = lstm_step(params.lstm, state, x, &trace.lstm_caches[cache_index++]);
    Distribution dist = classify(params.classifier, step.output);
    trace.loss += nll(dist, class_of(item.labels[t]));
    previous = options.feed_predicted ? label_of(dist.argmax()) : item.labels[t];
    trace.distributions.push_back(std::move(dist));
    trace.outputs.push_back(std::move(step.output));
    state = std::move(step.state);
  }
  return trace;
}

void accumulate_gradients(const ModelParams& params, const ForwardTrace& trace, ModelParams& grads,
                          double scale) {
  const std::size_t n = trace.distributions.size();
  const std::size_t offset = trace.has_scene_step ? 1 : 0;
  std::vector<Vector> output_grads(n + offset);
  for (std::size_t t = 0; t < n; ++t) {
    output_grads[t + offset] =
        classify_nll_backward(params.classifier, trace.outputs[t], trace.distributions[t],
                              class_of(trace.targets[t]), scale, grads.classifier);
  }
  std::vector<Vector> input_grads =
      lstm_backward(params.lstm, trace.lstm_caches, output_grads, grads.lstm);
  if (trace.has_scene_step) scene_embed_backward(trace.scene_cache, input_grads[0], grads.embedding);
  for (std::size_t t = 0; t < n; ++t) {
    joint_embed_backward(params.embedding, trace.embed_caches[t], input_grads[t + offset],
                         grads.embedding);
  }
}

ModelParams backward_train(const ModelParams& params, const ForwardTrace& trace) {
  ModelParams grads = params.zeros_like();
  accumulate_gradients(params, trace, grads);
  return grads;
}

double log_likelihood(const ModelParams& params, const SequenceItem& item) {
  return -forward_train(params, item).loss;
}

}  // namespace seqrec
