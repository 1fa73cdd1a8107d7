#include "seqrec/data.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "seqrec/errors.hpp"

namespace seqrec {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

LabelVocabulary::LabelVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ValidationError("vocabulary: empty identity name");
    if (!index_.emplace(names_[i], i + 1).second) {
      throw ValidationError("vocabulary: duplicate identity name '" + names_[i] + "'");
    }
  }
}

const std::string& LabelVocabulary::name(Label label) const {
  if (label < 1 || label > names_.size()) {
    throw IndexError("vocabulary: label " + std::to_string(label) + " out of range");
  }
  return names_[label - 1];
}

Label LabelVocabulary::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ValidationError("unknown identity '" + std::string(name) + "'");
  return it->second;
}

std::uint64_t LabelVocabulary::fingerprint() const {
  std::string joined;
  for (const std::string& n : names_) {
    joined += n;
    joined += '\n';
  }
  return fnv1a(joined);
}

namespace {

// Region dims fixed by the first record; scene dim likewise.
struct Shape {
  bool known = false;
  std::size_t scene_dim = 0;
  std::map<std::string, std::size_t> region_dims;
};

void check_photo(const PhotoRecord& photo, std::size_t num_identities, Shape& shape) {
  if (photo.instances.empty()) {
    throw ValidationError("photo '" + photo.photo_id + "' has no instances");
  }
  if (!all_finite(photo.scene)) {
    throw ValidationError("photo '" + photo.photo_id + "' has a non-finite scene feature");
  }
  if (!shape.known) {
    shape.known = true;
    shape.scene_dim = photo.scene.size();
    for (const auto& [name, feat] : photo.instances.front().regions) {
      shape.region_dims[name] = feat.size();
    }
    if (shape.region_dims.empty()) {
      throw ValidationError("photo '" + photo.photo_id + "': instance has no region features");
    }
  }
  if (photo.scene.size() != shape.scene_dim) {
    throw ShapeError("photo '" + photo.photo_id + "': scene dimension " +
                     std::to_string(photo.scene.size()) + ", dataset uses " +
                     std::to_string(shape.scene_dim));
  }
  for (const Instance& inst : photo.instances) {
    if (inst.label < 1 || inst.label > num_identities) {
      throw ValidationError("photo '" + photo.photo_id + "': label " + std::to_string(inst.label) +
                            " outside vocabulary");
    }
    if (inst.regions.size() != shape.region_dims.size()) {
      throw ValidationError("instance '" + inst.instance_id + "' has a different region set");
    }
    for (const auto& [name, feat] : inst.regions) {
      auto it = shape.region_dims.find(name);
      if (it == shape.region_dims.end()) {
        throw ValidationError("instance '" + inst.instance_id + "' has unexpected region '" + name +
                              "'");
      }
      if (feat.size() != it->second) {
        throw ShapeError("instance '" + inst.instance_id + "': region '" + name + "' has dimension " +
                         std::to_string(feat.size()) + ", dataset uses " +
                         std::to_string(it->second));
      }
      if (!all_finite(feat)) {
        throw ValidationError("instance '" + inst.instance_id + "' has non-finite features");
      }
    }
  }
}

Vector json_to_vector(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (const json& x : j) {
    if (!x.is_number()) throw ValidationError(std::string(what) + " must be an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

PhotoRecord photo_from_json(const json& j, const LabelVocabulary& vocab) {
  PhotoRecord photo;
  photo.photo_id = j.at("photo_id").get<std::string>();
  photo.scene = json_to_vector(j.at("scene"), "scene");
  for (const json& ji : j.at("instances")) {
    Instance inst;
    inst.instance_id = ji.at("instance_id").get<std::string>();
    inst.label = vocab.index_of(ji.at("label").get<std::string>());
    for (const auto& [name, feat] : ji.at("regions").items()) {
      inst.regions.emplace(name, json_to_vector(feat, "region feature"));
    }
    photo.instances.push_back(std::move(inst));
  }
  return photo;
}

}  // namespace

void validate_dataset(std::span<const PhotoRecord> photos, const LabelVocabulary& vocab) {
  Shape shape;
  std::set<std::string> ids;
  for (const PhotoRecord& photo : photos) {
    check_photo(photo, vocab.num_identities(), shape);
    if (!ids.insert(photo.photo_id).second) {
      throw ValidationError("duplicate photo id '" + photo.photo_id + "'");
    }
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

LabelVocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> names;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": empty identity name");
    }
    names.push_back(line);
  }
  try {
    return LabelVocabulary(std::move(names));
  } catch (const ValidationError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_vocabulary(const std::filesystem::path& path, const LabelVocabulary& vocab) {
  std::string out;
  for (const std::string& n : vocab.names()) {
    out += n;
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::string photo_to_json_line(const PhotoRecord& photo, const LabelVocabulary& vocab) {
  json j;
  j["photo_id"] = photo.photo_id;
  j["scene"] = photo.scene;
  json instances = json::array();
  for (const Instance& inst : photo.instances) {
    json ji;
    ji["instance_id"] = inst.instance_id;
    ji["label"] = vocab.name(inst.label);
    json regions = json::object();
    for (const auto& [name, feat] : inst.regions) regions[name] = feat;
    ji["regions"] = std::move(regions);
    instances.push_back(std::move(ji));
  }
  j["instances"] = std::move(instances);
  return j.dump();
}

std::vector<PhotoRecord> load_dataset(const std::filesystem::path& path,
                                      const LabelVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::vector<PhotoRecord> photos;
  Shape shape;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    try {
      PhotoRecord photo = photo_from_json(json::parse(line), vocab);
      check_photo(photo, vocab.num_identities(), shape);
      if (!ids.insert(photo.photo_id).second) {
        throw ValidationError("duplicate photo id '" + photo.photo_id + "'");
      }
      photos.push_back(std::move(photo));
    } catch (const json::exception& e) {
      throw IoError(where + "parse error: " + e.what());
    } catch (const Error& e) {
      throw IoError(where + e.what());
    }
  }
  return photos;
}

void save_dataset(const std::filesystem::path& path, std::span<const PhotoRecord> photos,
                  const LabelVocabulary& vocab) {
  validate_dataset(photos, vocab);
  std::string out;
  for (const PhotoRecord& photo : photos) {
    out += photo_to_json_line(photo, vocab);
    out += '\n';
  }
  write_file_atomic(path, out);
}

RegionSpec RegionSpec::parse(std::string_view text) {
  RegionSpec spec;
  std::size_t start = 0;
  while (true) {
    const std::size_t plus = text.find('+', start);
    std::string part(text.substr(start, plus == std::string_view::npos ? text.npos : plus - start));
    if (part.empty()) throw ConfigError("malformed region spec '" + std::string(text) + "'");
    spec.parts.push_back(std::move(part));
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return spec;
}

std::string RegionSpec::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += '+';
    out += parts[i];
  }
  return out;
}

namespace {

Vector concat_instance(const Instance& inst, std::span<const std::string> order) {
  Vector out;
  for (const std::string& name : order) {
    auto it = inst.regions.find(name);
    if (it == inst.regions.end()) {
      throw ValidationError("instance '" + inst.instance_id + "' has no region '" + name + "'");
    }
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

}  // namespace

PhotoRecord concat_regions(const PhotoRecord& photo, std::span<const std::string> order) {
  if (order.empty()) throw ValidationError("concat_regions: empty region order");
  PhotoRecord out;
  out.photo_id = photo.photo_id;
  out.scene = photo.scene;
  for (const Instance& inst : photo.instances) {
    Instance c;
    c.instance_id = inst.instance_id;
    c.label = inst.label;
    c.regions.emplace(kConcatRegion, concat_instance(inst, order));
    out.instances.push_back(std::move(c));
  }
  return out;
}

PhotoFeatures extract_features(const PhotoRecord& photo, const RegionSpec& region) {
  PhotoFeatures out;
  out.photo_id = photo.photo_id;
  out.scene = photo.scene;
  out.features.reserve(photo.size());
  for (const Instance& inst : photo.instances) {
    out.features.push_back(concat_instance(inst, region.parts));
    out.labels.push_back(inst.label);
  }
  return out;
}

std::vector<PhotoFeatures> extract_features(std::span<const PhotoRecord> photos,
                                            const RegionSpec& region) {
  std::vector<PhotoFeatures> out;
  out.reserve(photos.size());
  for (const PhotoRecord& p : photos) out.push_back(extract_features(p, region));
  return out;
}

std::size_t region_dim(std::span<const PhotoRecord> photos, const RegionSpec& region) {
  if (photos.empty() || photos.front().instances.empty()) {
    throw ValidationError("region_dim: empty dataset");
  }
  return concat_instance(photos.front().instances.front(), region.parts).size();
}

}  // namespace seqrec
