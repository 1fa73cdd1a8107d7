#include "seqrec/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqrec/errors.hpp"

namespace seqrec {

namespace {

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected dimension " + std::to_string(want) +
                     ", got " + std::to_string(got));
  }
}

Label one_hot_index(std::span<const double> v) {
  std::size_t hot = v.size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0 && hot == v.size()) {
      hot = i;
    } else if (v[i] != 0.0) {
      throw ValidationError("joint_embed: previous label is not a one-hot vector");
    }
  }
  if (hot == v.size()) throw ValidationError("joint_embed: previous label is all zeros");
  return hot;
}

}  // namespace

const char* to_string(EmbedMode mode) {
  return mode == EmbedMode::Addition ? "addition" : "max";
}

EmbedMode parse_embed_mode(std::string_view text) {
  if (text == "addition" || text == "add") return EmbedMode::Addition;
  if (text == "max" || text == "elementwise_max") return EmbedMode::ElementwiseMax;
  throw ConfigError("unknown embedding mode '" + std::string(text) + "' (expected addition|max)");
}

Vector joint_embed(const EmbeddingParams& params, std::span<const double> label_one_hot,
                   std::span<const double> feature, EmbedCache* cache) {
  require_dim(label_one_hot.size(), params.label_embed.cols(), "joint_embed label");
  return joint_embed(params, one_hot_index(label_one_hot), feature, cache);
}

Vector joint_embed(const EmbeddingParams& params, Label label, std::span<const double> feature,
                   EmbedCache* cache) {
  const std::size_t dim = params.embed_dim();
  if (label >= params.label_embed.cols()) {
    throw ValidationError("joint_embed: label " + std::to_string(label) + " outside vocabulary");
  }
  require_dim(feature.size(), params.feature_embed.cols(), "joint_embed feature");

  Vector label_part(dim);
  for (std::size_t r = 0; r < dim; ++r) label_part[r] = params.label_embed(r, label);
  Vector feature_part = matvec(params.feature_embed, feature);

  Vector pre(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    pre[r] = params.mode == EmbedMode::Addition ? label_part[r] + feature_part[r]
                                                : std::max(label_part[r], feature_part[r]);
  }
  Vector out = relu(pre);
  if (cache != nullptr) {
    cache->label = label;
    cache->feature.assign(feature.begin(), feature.end());
    cache->label_part = std::move(label_part);
    cache->feature_part = std::move(feature_part);
    cache->pre_activation = std::move(pre);
  }
  return out;
}

EmbedGrads joint_embed_backward(const EmbeddingParams& params, const EmbedCache& cache,
                                std::span<const double> grad_out, EmbeddingParams& grads) {
  const std::size_t dim = params.embed_dim();
  require_dim(grad_out.size(), dim, "joint_embed_backward");
  Vector grad_label(dim, 0.0);
  Vector grad_feature_part(dim, 0.0);
  for (std::size_t r = 0; r < dim; ++r) {
    if (!(cache.pre_activation[r] > 0.0)) continue;
    const double g = grad_out[r];
    if (params.mode == EmbedMode::Addition) {
      grad_label[r] = g;
      grad_feature_part[r] = g;
    } else if (cache.label_part[r] >= cache.feature_part[r]) {
      grad_label[r] = g;
    } else {
      grad_feature_part[r] = g;
    }
  }
  for (std::size_t r = 0; r < dim; ++r) grads.label_embed(r, cache.label) += grad_label[r];
  add_outer(grads.feature_embed, grad_feature_part, cache.feature);
  return EmbedGrads{matvec_transposed(params.feature_embed, grad_feature_part)};
}

Vector scene_embed(const EmbeddingParams& params, std::span<const double> scene,
                   SceneCache* cache) {
  require_dim(scene.size(), params.scene_embed.cols(), "scene_embed");
  Vector pre = matvec(params.scene_embed, scene);
  Vector out = relu(pre);
  if (cache != nullptr) {
    cache->scene.assign(scene.begin(), scene.end());
    cache->pre_activation = std::move(pre);
  }
  return out;
}

void scene_embed_backward(const SceneCache& cache, std::span<const double> grad_out,
                          EmbeddingParams& grads) {
  require_dim(grad_out.size(), cache.pre_activation.size(), "scene_embed_backward");
  Vector masked(grad_out.size(), 0.0);
  for (std::size_t r = 0; r < masked.size(); ++r) {
    if (cache.pre_activation[r] > 0.0) masked[r] = grad_out[r];
  }
  add_outer(grads.scene_embed, masked, cache.scene);
}

LstmState LstmState::zeros(std::size_t hidden_dim) {
  return LstmState{Vector(hidden_dim, 0.0), Vector(hidden_dim, 0.0)};
}

LstmStep lstm_step(const LstmParams& params, const LstmState& state, std::span<const double> x,
                   LstmCache* cache) {
  const std::size_t hidden = params.hidden_dim();
  require_dim(x.size(), params.input_dim(), "lstm_step input");
  require_dim(state.h.size(), hidden, "lstm_step hidden state");
  require_dim(state.c.size(), hidden, "lstm_step cell state");

  Vector pre = params.bias;
  matvec_accumulate(params.input_weights, x, pre);
  matvec_accumulate(params.hidden_weights, state.h, pre);

  Vector i(hidden), f(hidden), g(hidden), o(hidden), c(hidden), tanh_c(hidden), h(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    i[k] = sigmoid(pre[k]);
    f[k] = sigmoid(pre[hidden + k]);
    g[k] = std::tanh(pre[2 * hidden + k]);
    o[k] = sigmoid(pre[3 * hidden + k]);
    c[k] = f[k] * state.c[k] + i[k] * g[k];
    tanh_c[k] = std::tanh(c[k]);
    h[k] = o[k] * tanh_c[k];
  }
  if (cache != nullptr) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev = state.h;
    cache->c_prev = state.c;
    cache->input_gate = std::move(i);
    cache->forget_gate = std::move(f);
    cache->candidate = std::move(g);
    cache->output_gate = std::move(o);
    cache->tanh_c = tanh_c;
  }
  Vector output = h;
  return LstmStep{LstmState{std::move(h), std::move(c)}, std::move(output)};
}

std::vector<Vector> lstm_backward(const LstmParams& params, std::span<const LstmCache> caches,
                                  std::span<const Vector> output_grads, LstmParams& grads) {
  const std::size_t hidden = params.hidden_dim();
  require_dim(output_grads.size(), caches.size(), "lstm_backward output grads");
  std::vector<Vector> input_grads(caches.size());
  Vector dh_next(hidden, 0.0);
  Vector dc_next(hidden, 0.0);
  Vector dpre(4 * hidden);

  for (std::size_t step = caches.size(); step-- > 0;) {
    const LstmCache& cache = caches[step];
    const Vector& dz = output_grads[step];
    for (std::size_t k = 0; k < hidden; ++k) {
      const double dh = dh_next[k] + (dz.empty() ? 0.0 : dz[k]);
      const double i = cache.input_gate[k];
      const double f = cache.forget_gate[k];
      const double g = cache.candidate[k];
      const double o = cache.output_gate[k];
      const double tc = cache.tanh_c[k];
      const double dc = dh * o * (1.0 - tc * tc) + dc_next[k];
      dpre[k] = dc * g * i * (1.0 - i);
      dpre[hidden + k] = dc * cache.c_prev[k] * f * (1.0 - f);
      dpre[2 * hidden + k] = dc * i * (1.0 - g * g);
      dpre[3 * hidden + k] = dh * tc * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    add_outer(grads.input_weights, dpre, cache.x);
    add_outer(grads.hidden_weights, dpre, cache.h_prev);
    for (std::size_t k = 0; k < dpre.size(); ++k) grads.bias[k] += dpre[k];
    input_grads[step] = matvec_transposed(params.input_weights, dpre);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    matvec_transposed_accumulate(params.hidden_weights, dpre, dh_next);
  }
  return input_grads;
}

Distribution classify(const ClassifierParams& params, std::span<const double> z) {
  require_dim(z.size(), params.weights.cols(), "classify");
  Vector logits = params.bias;
  matvec_accumulate(params.weights, z, logits);
  return softmax(logits);
}

Vector classify_nll_backward(const ClassifierParams& params, std::span<const double> z,
                             const Distribution& dist, std::size_t target_class, double scale,
                             ClassifierParams& grads) {
  if (target_class >= dist.dim()) throw IndexError("classify_nll_backward: target out of range");
  Vector dlogits(dist.probs().begin(), dist.probs().end());
  dlogits[target_class] -= 1.0;
  for (double& d : dlogits) d *= scale;
  add_outer(grads.weights, dlogits, z);
  for (std::size_t k = 0; k < dlogits.size(); ++k) grads.bias[k] += dlogits[k];
  return matvec_transposed(params.weights, dlogits);
}

}  // namespace seqrec
