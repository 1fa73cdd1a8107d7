#include "seqrec/config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "seqrec/errors.hpp"

namespace seqrec {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + what);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a nonnegative integer");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v, "a real number");
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a real number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

int to_split(const std::string& key, const std::string& v) {
  if (v == "0") return 0;
  if (v == "1") return 1;
  bad_value(key, v, "a split index (0 or 1)");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string real_text(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "num_identities", "num_groups", "num_scenes", "feature_dim", "scene_feature_dim",
      "prototype_scale", "noise_scale", "scene_noise_scale", "co_occurrence_strength",
      "scene_affinity_strength", "photos_per_split", "min_instances", "max_instances", "regions",
      "embed_dim", "hidden_dim", "unroll", "learning_rate", "decay_factor", "decay_epoch",
      "total_epochs", "epochs", "batch_size", "embedding_mode", "use_scene", "model", "region",
      "init_scale", "clip_norm", "feed_predicted", "train_split", "budget", "fusion", "eval_split",
      "gradcheck_dim", "gradcheck_seeds", "gradcheck_corrupt", "gradcheck_zero_init", "seed"};
  return keys;
}

bool is_known_key(std::string_view key) {
  const auto& keys = known_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

KeyValues parse_key_values(std::string_view text, std::string_view source) {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!is_known_key(key)) {
      throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": unknown key '" +
                        key + "'");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_file(path), path.string());
}

std::pair<std::string, std::string> parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(text) + "' is not key=value");
  }
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
  GenConfig& g = c.gen;
  TrainConfig& t = c.train;
  if (key == "num_identities") g.num_identities = to_count(key, v);
  else if (key == "num_groups") g.num_groups = to_count(key, v);
  else if (key == "num_scenes") g.num_scenes = to_count(key, v);
  else if (key == "feature_dim") g.feature_dim = to_count(key, v);
  else if (key == "scene_feature_dim") g.scene_feature_dim = to_count(key, v);
  else if (key == "prototype_scale") g.prototype_scale = to_real(key, v);
  else if (key == "noise_scale") g.noise_scale = to_real(key, v);
  else if (key == "scene_noise_scale") g.scene_noise_scale = to_real(key, v);
  else if (key == "co_occurrence_strength") g.co_occurrence_strength = to_real(key, v);
  else if (key == "scene_affinity_strength") g.scene_affinity_strength = to_real(key, v);
  else if (key == "photos_per_split") g.photos_per_split = to_count(key, v);
  else if (key == "min_instances") g.min_instances = to_count(key, v);
  else if (key == "max_instances") g.max_instances = to_count(key, v);
  else if (key == "regions") g.regions = to_list(v);
  else if (key == "embed_dim") t.embed_dim = to_count(key, v);
  else if (key == "hidden_dim") t.hidden_dim = to_count(key, v);
  else if (key == "unroll") t.unroll = to_count(key, v);
  else if (key == "learning_rate") t.learning_rate = to_real(key, v);
  else if (key == "decay_factor") t.decay_factor = to_real(key, v);
  else if (key == "decay_epoch") t.decay_epoch = to_count(key, v);
  else if (key == "total_epochs" || key == "epochs") t.total_epochs = to_count(key, v);
  else if (key == "batch_size") t.batch_size = to_count(key, v);
  else if (key == "embedding_mode") t.mode = parse_embed_mode(v);
  else if (key == "use_scene") t.use_scene = to_bool(key, v);
  else if (key == "model") t.model = parse_model_kind(v);
  else if (key == "region") t.region = RegionSpec::parse(v).to_string();
  else if (key == "init_scale") t.init_scale = to_real(key, v);
  else if (key == "clip_norm") t.clip_norm = to_real(key, v);
  else if (key == "feed_predicted") t.feed_predicted = to_bool(key, v);
  else if (key == "train_split") c.train_split = to_split(key, v);
  else if (key == "budget") c.eval.budget = to_count(key, v);
  else if (key == "fusion") c.eval.fusion = parse_fusion_mode(v);
  else if (key == "eval_split") {
    if (v == "auto") c.eval.eval_split.reset();
    else c.eval.eval_split = to_split(key, v);
  }
  else if (key == "gradcheck_dim") c.gradcheck.dim = to_count(key, v);
  else if (key == "gradcheck_seeds") c.gradcheck.seeds = to_count(key, v);
  else if (key == "gradcheck_corrupt") c.gradcheck.corrupt = v;
  else if (key == "gradcheck_zero_init") c.gradcheck.zero_init = to_bool(key, v);
  else if (key == "seed") {
    c.seed = to_u64(key, v);
    g.seed = c.seed;
    t.seed = c.seed;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig make_config(const KeyValues& values) {
  ExperimentConfig c;
  c.gen.seed = c.seed;
  c.train.seed = c.seed;
  for (const auto& [key, value] : values) apply_key(c, key, value);
  return c;
}

std::string describe(const ExperimentConfig& c) {
  const GenConfig& g = c.gen;
  const TrainConfig& t = c.train;
  std::ostringstream out;
  auto line = [&out](const char* key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  line("seed", std::to_string(c.seed));
  line("num_identities", std::to_string(g.num_identities));
  line("num_groups", std::to_string(g.num_groups));
  line("num_scenes", std::to_string(g.num_scenes));
  line("feature_dim", std::to_string(g.feature_dim));
  line("scene_feature_dim", std::to_string(g.scene_feature_dim));
  line("prototype_scale", real_text(g.prototype_scale));
  line("noise_scale", real_text(g.noise_scale));
  line("scene_noise_scale", real_text(g.scene_noise_scale));
  line("co_occurrence_strength", real_text(g.co_occurrence_strength));
  line("scene_affinity_strength", real_text(g.scene_affinity_strength));
  line("photos_per_split", std::to_string(g.photos_per_split));
  line("min_instances", std::to_string(g.min_instances));
  line("max_instances", std::to_string(g.max_instances));
  line("regions", join(g.regions));
  line("embed_dim", std::to_string(t.embed_dim));
  line("hidden_dim", std::to_string(t.hidden_dim));
  line("unroll", std::to_string(t.unroll));
  line("learning_rate", real_text(t.learning_rate));
  line("decay_factor", real_text(t.decay_factor));
  line("decay_epoch", std::to_string(t.decay_epoch));
  line("total_epochs", std::to_string(t.total_epochs));
  line("batch_size", std::to_string(t.batch_size));
  line("embedding_mode", to_string(t.mode));
  line("use_scene", t.use_scene ? "true" : "false");
  line("model", to_string(t.model));
  line("region", t.region);
  line("init_scale", real_text(t.init_scale));
  line("clip_norm", real_text(t.clip_norm));
  line("feed_predicted", t.feed_predicted ? "true" : "false");
  line("train_split", std::to_string(c.train_split));
  line("budget", std::to_string(c.eval.budget));
  line("fusion", to_string(c.eval.fusion));
  line("eval_split", c.eval.eval_split ? std::to_string(*c.eval.eval_split) : "auto");
  line("gradcheck_dim", std::to_string(c.gradcheck.dim));
  line("gradcheck_seeds", std::to_string(c.gradcheck.seeds));
  line("gradcheck_corrupt", c.gradcheck.corrupt);
  line("gradcheck_zero_init", c.gradcheck.zero_init ? "true" : "false");
  return out.str();
}

}  // namespace seqrec
