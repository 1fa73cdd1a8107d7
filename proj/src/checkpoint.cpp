#include "seqrec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "seqrec/errors.hpp"

namespace seqrec {

namespace {

constexpr char kMagic[8] = {'S', 'Q', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr char kLittleEndian = 'L';

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u32(std::uint32_t v) { integer(v, 4); }
  void u64(std::uint64_t v) { integer(v, 8); }
  void f64(double v) { integer(std::bit_cast<std::uint64_t>(v), 8); }
  void text(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  void integer(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::string_view bytes(std::size_t n) {
    if (in_.size() - pos_ < n) throw IoError("checkpoint: truncated file");
    std::string_view s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(integer(4)); }
  std::uint64_t u64() { return integer(8); }
  double f64() { return std::bit_cast<double>(integer(8)); }
  std::string text() { return std::string(bytes(u32())); }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::uint64_t integer(int width) {
    std::string_view s = bytes(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

using Meta = std::map<std::string, std::string>;

std::size_t meta_size(const Meta& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("checkpoint: missing meta key '" + key + "'");
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception&) {
    throw IoError("checkpoint: malformed value for '" + key + "'");
  }
}

const std::string& meta_text(const Meta& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("checkpoint: missing meta key '" + key + "'");
  return it->second;
}

void write_blocks(Writer& w, std::vector<ParamBlock> blocks) {
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const ParamBlock& b : blocks) {
    w.text(b.name);
    w.u64(b.rows);
    w.u64(b.cols);
    for (double v : b.values) w.f64(v);
  }
}

void read_blocks(Reader& r, std::vector<ParamBlock> blocks) {
  const std::uint32_t count = r.u32();
  if (count != blocks.size()) throw IoError("checkpoint: unexpected block count");
  for (ParamBlock& b : blocks) {
    const std::string name = r.text();
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (name != b.name || rows != b.rows || cols != b.cols) {
      throw IoError("checkpoint: block '" + name + "' does not match expected '" +
                    std::string(b.name) + "' " + std::to_string(b.rows) + "x" +
                    std::to_string(b.cols));
    }
    for (double& v : b.values) v = r.f64();
  }
}

std::vector<ParamBlock> appearance_blocks(AppearanceModel& m) {
  return {ParamBlock{"classifier.weights", m.classifier.weights.values(), m.classifier.weights.rows(),
                     m.classifier.weights.cols()},
          ParamBlock{"classifier.bias", std::span<double>(m.classifier.bias), m.classifier.bias.size(),
                     1}};
}

}  // namespace

std::size_t Checkpoint::num_identities() const {
  if (const auto* p = std::get_if<ModelParams>(&model)) return p->config.num_identities;
  return std::get<AppearanceModel>(model).num_identities();
}

std::size_t Checkpoint::feature_dim() const {
  if (const auto* p = std::get_if<ModelParams>(&model)) return p->config.feature_dim;
  return std::get<AppearanceModel>(model).feature_dim();
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  Meta meta;
  meta["kind"] = to_string(checkpoint.kind());
  meta["region"] = checkpoint.region;
  meta["vocab_fingerprint"] = std::to_string(checkpoint.vocab_fingerprint);
  meta["train_split"] = std::to_string(checkpoint.train_split);
  meta["num_identities"] = std::to_string(checkpoint.num_identities());
  meta["feature_dim"] = std::to_string(checkpoint.feature_dim());
  if (const auto* p = std::get_if<ModelParams>(&checkpoint.model)) {
    meta["scene_dim"] = std::to_string(p->config.scene_dim);
    meta["embed_dim"] = std::to_string(p->config.embed_dim);
    meta["hidden_dim"] = std::to_string(p->config.hidden_dim);
    meta["embedding_mode"] = to_string(p->config.mode);
    meta["use_scene"] = p->config.use_scene ? "1" : "0";
  }

  Writer w;
  w.bytes(std::string_view(kMagic, sizeof kMagic));
  w.bytes(std::string_view(&kLittleEndian, 1));
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [key, value] : meta) {
    w.text(key);
    w.text(value);
  }
  // blocks() needs mutable access; the values are only read here.
  Checkpoint& mutable_ckpt = const_cast<Checkpoint&>(checkpoint);
  if (auto* p = std::get_if<ModelParams>(&mutable_ckpt.model)) {
    write_blocks(w, p->blocks());
  } else {
    write_blocks(w, appearance_blocks(std::get<AppearanceModel>(mutable_ckpt.model)));
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw IoError("checkpoint: bad magic");
  }
  if (r.bytes(1)[0] != kLittleEndian) throw IoError("checkpoint: unsupported byte order");
  Meta meta;
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = r.text();
    meta[key] = r.text();
  }

  Checkpoint ckpt;
  ckpt.region = meta_text(meta, "region");
  try {
    ckpt.vocab_fingerprint = std::stoull(meta_text(meta, "vocab_fingerprint"));
  } catch (const std::logic_error&) {
    throw IoError("checkpoint: malformed vocab_fingerprint");
  }
  if (auto it = meta.find("train_split"); it != meta.end()) {
    try {
      ckpt.train_split = std::stoi(it->second);
    } catch (const std::exception&) {
      throw IoError("checkpoint: bad train_split '" + it->second + "'");
    }
  }
  const ModelKind kind = parse_model_kind(meta_text(meta, "kind"));
  if (kind == ModelKind::Sequence) {
    ModelConfig mc;
    mc.num_identities = meta_size(meta, "num_identities");
    mc.feature_dim = meta_size(meta, "feature_dim");
    mc.scene_dim = meta_size(meta, "scene_dim");
    mc.embed_dim = meta_size(meta, "embed_dim");
    mc.hidden_dim = meta_size(meta, "hidden_dim");
    mc.mode = parse_embed_mode(meta_text(meta, "embedding_mode"));
    mc.use_scene = meta_text(meta, "use_scene") == "1";
    ModelParams params = ModelParams::zeros(mc);
    read_blocks(r, params.blocks());
    ckpt.model = std::move(params);
  } else {
    AppearanceModel m =
        AppearanceModel::zeros(meta_size(meta, "num_identities"), meta_size(meta, "feature_dim"));
    read_blocks(r, appearance_blocks(m));
    ckpt.model = std::move(m);
  }
  if (!r.done()) throw IoError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<PredictionResult> predict_with(const Checkpoint& checkpoint,
                                           std::span<const PhotoFeatures> photos,
                                           std::size_t budget, std::uint64_t seed) {
  for (const PhotoFeatures& p : photos) {
    for (const Vector& f : p.features) {
      if (f.size() != checkpoint.feature_dim()) {
        throw ShapeError("photo '" + p.photo_id + "' has feature dimension " +
                         std::to_string(f.size()) + " but the checkpoint expects " +
                         std::to_string(checkpoint.feature_dim()));
      }
    }
  }
  if (const auto* params = std::get_if<ModelParams>(&checkpoint.model)) {
    if (params->config.use_scene && !photos.empty() &&
        photos.front().scene.size() != params->config.scene_dim) {
      throw ShapeError("scene dimension " + std::to_string(photos.front().scene.size()) +
                       " does not match the checkpoint's " +
                       std::to_string(params->config.scene_dim));
    }
    return predict_all(*params, photos, budget, seed);
  }
  return predict_appearance_all(std::get<AppearanceModel>(checkpoint.model), photos);
}

}  // namespace seqrec
