#pragma once

// Photo records, the identity vocabulary, the on-disk dataset format and
// region selection / concatenation.
//
// Dataset files are JSON lines, one photo per line:
//   {"photo_id": "p0_00017", "scene": [..],
//    "instances": [{"instance_id": "p0_00017_i0", "label": "id_012",
//                   "regions": {"head": [..], "upper": [..]}}, ..]}
// Labels are identity names from the vocabulary file (one name per line; line k
// is identity k, index 0 is the implicit start label). Doubles are written in
// shortest round-trip form, so save/load is bit-exact.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqrec/layers.hpp"

namespace seqrec {

struct Instance {
  std::string instance_id;
  Label label = 0;
  std::map<std::string, Vector> regions;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct PhotoRecord {
  std::string photo_id;
  Vector scene;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
  friend bool operator==(const PhotoRecord&, const PhotoRecord&) = default;
};

class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  /// Names of identities 1..K in order. Throws ValidationError on duplicates or empty names.
  explicit LabelVocabulary(std::vector<std::string> names);

  std::size_t num_identities() const { return names_.size(); }
  const std::string& name(Label label) const;
  Label index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }
  const std::vector<std::string>& names() const { return names_; }
  /// FNV-1a over the ordered names; used to detect incompatible runs.
  std::uint64_t fingerprint() const;

  friend bool operator==(const LabelVocabulary& a, const LabelVocabulary& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, Label> index_;
};

struct SplitPair {
  std::vector<PhotoRecord> set_0;
  std::vector<PhotoRecord> set_1;

  const std::vector<PhotoRecord>& operator[](int which) const { return which == 0 ? set_0 : set_1; }
};

/// Checks record invariants: at least one instance per photo, labels inside the
/// vocabulary, one region-name set and one dimension per region for the whole dataset.
void validate_dataset(std::span<const PhotoRecord> photos, const LabelVocabulary& vocab);

LabelVocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const std::filesystem::path& path, const LabelVocabulary& vocab);

std::vector<PhotoRecord> load_dataset(const std::filesystem::path& path,
                                      const LabelVocabulary& vocab);
void save_dataset(const std::filesystem::path& path, std::span<const PhotoRecord> photos,
                  const LabelVocabulary& vocab);

/// Serialized form of a single record (one line, no trailing newline).
std::string photo_to_json_line(const PhotoRecord& photo, const LabelVocabulary& vocab);

/// Which region feature a model consumes: a single name ("head") or a
/// concatenation written "head+upper".
struct RegionSpec {
  std::vector<std::string> parts;

  static RegionSpec parse(std::string_view text);
  std::string to_string() const;
  bool is_concat() const { return parts.size() > 1; }
};

inline constexpr const char* kConcatRegion = "concat";

/// Concatenates the listed regions per instance into a single region named "concat".
PhotoRecord concat_regions(const PhotoRecord& photo, std::span<const std::string> order);

/// A photo reduced to what the models consume: scene plus one feature vector per instance.
struct PhotoFeatures {
  std::string photo_id;
  Vector scene;
  std::vector<Vector> features;
  std::vector<Label> labels;

  std::size_t size() const { return features.size(); }
};

PhotoFeatures extract_features(const PhotoRecord& photo, const RegionSpec& region);
std::vector<PhotoFeatures> extract_features(std::span<const PhotoRecord> photos,
                                            const RegionSpec& region);

/// Dimension of the feature produced by `region` on this dataset.
std::size_t region_dim(std::span<const PhotoRecord> photos, const RegionSpec& region);

std::uint64_t fnv1a(std::string_view text);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace seqrec
