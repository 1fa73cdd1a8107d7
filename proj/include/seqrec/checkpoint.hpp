#pragma once

// Binary checkpoint format. All integers and doubles are little-endian,
// declared by the byte-order tag; doubles are raw IEEE-754 bit patterns, so a
// save/load round trip is bit-exact.
//
//   offset 0   8 bytes  magic "SQRCKPT1"
//   offset 8   1 byte   byte order tag 'L'
//   u32 n_meta, then n_meta x { u32 key_len, key, u32 value_len, value }   (UTF-8 text)
//   u32 n_blocks, then n_blocks x { u32 name_len, name, u64 rows, u64 cols,
//                                   rows*cols x f64 row-major }
//
// Meta keys: kind (sequence|appearance), region, vocab_fingerprint, train_split, num_identities,
// feature_dim, and for sequence models scene_dim, embed_dim, hidden_dim,
// embedding_mode, use_scene. Blocks follow ModelParams::blocks() order
// (appearance models: classifier.weights, classifier.bias).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>

#include "seqrec/appearance.hpp"
#include "seqrec/seqmodel.hpp"

namespace seqrec {

struct Checkpoint {
  std::variant<ModelParams, AppearanceModel> model;
  std::string region = "head";
  std::uint64_t vocab_fingerprint = 0;
  int train_split = -1;  // -1 when unknown

  ModelKind kind() const {
    return std::holds_alternative<ModelParams>(model) ? ModelKind::Sequence : ModelKind::Appearance;
  }
  std::size_t num_identities() const;
  std::size_t feature_dim() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Predictions of whichever model the checkpoint holds. Throws ShapeError when the
/// photos' feature dimensions do not match the model.
std::vector<PredictionResult> predict_with(const Checkpoint& checkpoint,
                                           std::span<const PhotoFeatures> photos,
                                           std::size_t budget, std::uint64_t seed);

}  // namespace seqrec
