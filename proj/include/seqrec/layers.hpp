#pragma once

// Learnable building blocks of the sequence model, each with a hand-derived
// backward pass: the joint label/feature embedding, the scene projection, a
// standard LSTM cell and the softmax classifier head.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "seqrec/numcore.hpp"

namespace seqrec {

/// Identity label index. 0 is the auxiliary start label; real identities are 1..K.
using Label = std::size_t;
inline constexpr Label kStartLabel = 0;

enum class EmbedMode { Addition, ElementwiseMax };

const char* to_string(EmbedMode mode);
EmbedMode parse_embed_mode(std::string_view text);

struct EmbeddingParams {
  DenseMatrix label_embed;    // embed_dim x (num_identities + 1)
  DenseMatrix feature_embed;  // embed_dim x feature_dim
  DenseMatrix scene_embed;    // embed_dim x scene_dim
  EmbedMode mode = EmbedMode::ElementwiseMax;

  std::size_t embed_dim() const { return feature_embed.rows(); }

  friend bool operator==(const EmbeddingParams&, const EmbeddingParams&) = default;
};

struct EmbedCache {
  Label label = kStartLabel;
  Vector feature;
  Vector label_part;    // column `label` of label_embed
  Vector feature_part;  // feature_embed * feature
  Vector pre_activation;
};

/// x = relu(U_y y + U_b f) (Addition) or relu(max(U_y y, U_b f)) (ElementwiseMax).
/// `label_one_hot` must be exactly one-hot over the label vocabulary.
Vector joint_embed(const EmbeddingParams& params, std::span<const double> label_one_hot,
                   std::span<const double> feature, EmbedCache* cache = nullptr);
/// Same as above with the label given as an index.
Vector joint_embed(const EmbeddingParams& params, Label label, std::span<const double> feature,
                   EmbedCache* cache = nullptr);

struct EmbedGrads {
  Vector feature;  // gradient w.r.t. the instance feature
};

/// Accumulates into grads.label_embed / grads.feature_embed and returns the feature gradient.
/// In ElementwiseMax mode each coordinate's gradient goes to the branch that attained the
/// maximum; ties go to the label branch.
EmbedGrads joint_embed_backward(const EmbeddingParams& params, const EmbedCache& cache,
                                std::span<const double> grad_out, EmbeddingParams& grads);

struct SceneCache {
  Vector scene;
  Vector pre_activation;
};

/// relu(U_I s)
Vector scene_embed(const EmbeddingParams& params, std::span<const double> scene,
                   SceneCache* cache = nullptr);
void scene_embed_backward(const SceneCache& cache, std::span<const double> grad_out,
                          EmbeddingParams& grads);

/// Gate blocks are stacked row-wise in the order input, forget, candidate, output.
struct LstmParams {
  DenseMatrix input_weights;   // 4H x E
  DenseMatrix hidden_weights;  // 4H x H
  Vector bias;                 // 4H

  std::size_t hidden_dim() const { return hidden_weights.cols(); }
  std::size_t input_dim() const { return input_weights.cols(); }

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden_dim);
};

struct LstmCache {
  Vector x;
  Vector h_prev;
  Vector c_prev;
  Vector input_gate;
  Vector forget_gate;
  Vector candidate;
  Vector output_gate;
  Vector tanh_c;
};

struct LstmStep {
  LstmState state;
  Vector output;  // z_t, identical to the new hidden state
};

LstmStep lstm_step(const LstmParams& params, const LstmState& state, std::span<const double> x,
                   LstmCache* cache = nullptr);

/// Backpropagation through a contiguous unroll. `output_grads[t]` is dLoss/dz_t (may be empty
/// for steps with no loss). Weight gradients are accumulated into `grads`; the returned
/// vectors are dLoss/dx_t. The initial state is treated as a constant.
std::vector<Vector> lstm_backward(const LstmParams& params, std::span<const LstmCache> caches,
                                  std::span<const Vector> output_grads, LstmParams& grads);

struct ClassifierParams {
  DenseMatrix weights;  // K x H
  Vector bias;          // K

  std::size_t num_classes() const { return weights.rows(); }

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

/// softmax(W z + b). Class index k corresponds to identity label k + 1.
Distribution classify(const ClassifierParams& params, std::span<const double> z);

/// Backward of nll(classify(z), target_class) scaled by `scale`; accumulates weight
/// gradients and returns dLoss/dz.
Vector classify_nll_backward(const ClassifierParams& params, std::span<const double> z,
                             const Distribution& dist, std::size_t target_class, double scale,
                             ClassifierParams& grads);

inline std::size_t class_of(Label label) { return label - 1; }
inline Label label_of(std::size_t class_index) { return class_index + 1; }

}  // namespace seqrec
