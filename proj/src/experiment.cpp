#include "seqrec/experiment.hpp"

#include <cstdio>

#include "seqrec/appearance.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/rng.hpp"

namespace seqrec {

const char* to_string(Method method) {
  switch (method) {
    case Method::AppearanceOnly: return "appearance-only";
    case Method::OursRelation: return "ours-relation";
    case Method::Ours: return "ours";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  for (Method m : kAllMethods) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

TrainConfig config_for(Method method, TrainConfig base) {
  switch (method) {
    case Method::AppearanceOnly:
      base.model = ModelKind::Appearance;
      break;
    case Method::OursRelation:
      base.model = ModelKind::Sequence;
      base.use_scene = false;
      break;
    case Method::Ours:
      base.model = ModelKind::Sequence;
      base.use_scene = true;
      break;
  }
  return base;
}

Method method_of(const Checkpoint& checkpoint) {
  if (const auto* p = std::get_if<ModelParams>(&checkpoint.model)) {
    return p->config.use_scene ? Method::Ours : Method::OursRelation;
  }
  return Method::AppearanceOnly;
}

nlohmann::json to_json(const TrainReport& report) {
  const TrainConfig& c = report.config;
  nlohmann::json j;
  j["kind"] = "train_report";
  j["seed"] = report.seed;
  j["checkpoint"] = report.checkpoint;
  j["epoch_loss"] = report.epoch_loss;
  j["epoch_eval_accuracy"] = report.epoch_eval_accuracy;
  j["config"] = {{"model", to_string(c.model)},
                 {"embed_dim", c.embed_dim},
                 {"hidden_dim", c.hidden_dim},
                 {"unroll", c.unroll},
                 {"learning_rate", c.learning_rate},
                 {"decay_factor", c.decay_factor},
                 {"decay_epoch", c.decay_epoch},
                 {"total_epochs", c.total_epochs},
                 {"batch_size", c.batch_size},
                 {"embedding_mode", to_string(c.mode)},
                 {"use_scene", c.use_scene},
                 {"region", c.region},
                 {"init_scale", c.init_scale},
                 {"clip_norm", c.clip_norm},
                 {"feed_predicted", c.feed_predicted},
                 {"seed", c.seed}};
  return j;
}

TrainedModel train_model(std::span<const PhotoRecord> photos, const LabelVocabulary& vocab,
                         const TrainConfig& config, int train_split) {
  config.validate();
  validate_dataset(photos, vocab);
  const RegionSpec region = RegionSpec::parse(config.region);
  const std::vector<PhotoFeatures> features = extract_features(photos, region);
  TrainedModel out;
  out.checkpoint.region = region.to_string();
  out.checkpoint.vocab_fingerprint = vocab.fingerprint();
  out.checkpoint.train_split = train_split;
  if (config.model == ModelKind::Appearance) {
    AppearanceTrainResult r = train_appearance(features, vocab.num_identities(), config);
    out.checkpoint.model = std::move(r.model);
    out.report = std::move(r.report);
  } else {
    TrainResult r = train_features(features, vocab.num_identities(), config);
    out.checkpoint.model = std::move(r.params);
    out.report = std::move(r.report);
  }
  return out;
}

ProtocolResult run_protocol(const SplitPair& splits, const LabelVocabulary& vocab,
                            const TrainConfig& config, Method method, std::size_t budget) {
  const TrainConfig cfg = config_for(method, config);
  ProtocolResult result{method, {}, {}};
  std::vector<DirectionMetrics> directions;
  for (int train_split : {0, 1}) {
    const int eval_split = 1 - train_split;
    DirectionRun run;
    run.name = std::to_string(train_split) + "->" + std::to_string(eval_split);
    run.model = train_model(splits[train_split], vocab, cfg, train_split);
    const std::vector<PhotoFeatures> eval_features =
        extract_features(splits[eval_split], RegionSpec::parse(cfg.region));
    run.predictions = predict_with(run.model.checkpoint, eval_features, budget,
                                   derive_seed(cfg.seed, "eval", train_split));
    run.metrics = evaluate(splits[eval_split], run.predictions);
    directions.push_back(DirectionMetrics{run.name, run.metrics});
    result.runs.push_back(std::move(run));
  }
  result.report = combine_directions(std::move(directions));
  result.report.method = to_string(method);
  result.report.region = RegionSpec::parse(cfg.region).to_string();
  result.report.fusion = "none";
  result.report.num_identities = vocab.num_identities();
  result.report.vocab_fingerprint = vocab.fingerprint();
  return result;
}

MetricsReport fuse_protocols(std::span<const ProtocolResult> per_region, const SplitPair& splits,
                             const LabelVocabulary& vocab, FusionMode mode) {
  if (per_region.size() < 2) throw ValidationError("region fusion needs at least two regions");
  const std::size_t n_dirs = per_region.front().runs.size();
  std::vector<DirectionMetrics> directions;
  std::string region;
  for (const ProtocolResult& r : per_region) {
    if (r.runs.size() != n_dirs || r.method != per_region.front().method) {
      throw ValidationError("region fusion: protocol results do not line up");
    }
    region += (region.empty() ? "" : ",") + r.report.region;
  }
  for (std::size_t d = 0; d < n_dirs; ++d) {
    std::vector<std::vector<PredictionResult>> sets;
    for (const ProtocolResult& r : per_region) {
      if (r.runs[d].name != per_region.front().runs[d].name) {
        throw ValidationError("region fusion: direction mismatch");
      }
      sets.push_back(r.runs[d].predictions);
    }
    const std::vector<PredictionResult> fused = fuse_region_predictions(sets, mode);
    const int eval_split = 1 - per_region.front().runs[d].model.checkpoint.train_split;
    directions.push_back(
        DirectionMetrics{per_region.front().runs[d].name, evaluate(splits[eval_split], fused)});
  }
  MetricsReport report = combine_directions(std::move(directions));
  report.method = to_string(per_region.front().method);
  report.region = region;
  report.fusion = to_string(mode);
  report.num_identities = vocab.num_identities();
  report.vocab_fingerprint = vocab.fingerprint();
  return report;
}

std::vector<MetricsReport> run_ablation(const SplitPair& splits, const LabelVocabulary& vocab,
                                        const TrainConfig& config, std::size_t budget) {
  std::vector<MetricsReport> rows;
  for (Method m : kAllMethods) rows.push_back(run_protocol(splits, vocab, config, m, budget).report);
  return rows;
}

namespace {

std::string percent(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

}  // namespace

std::string format_ablation(std::span<const MetricsReport> rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %12s %12s %12s\n", "method", "acc_overall", "acc_multi",
                "acc_single");
  out += buf;
  for (const MetricsReport& r : rows) {
    std::snprintf(buf, sizeof buf, "%-18s %12s %12s %12s\n", r.method.c_str(),
                  percent(r.acc_overall).c_str(), percent(r.acc_multi).c_str(),
                  percent(r.acc_single).c_str());
    out += buf;
  }
  return out;
}

nlohmann::json ablation_to_json(std::span<const MetricsReport> rows) {
  nlohmann::json j;
  j["kind"] = "ablation";
  j["rows"] = nlohmann::json::array();
  for (const MetricsReport& r : rows) j["rows"].push_back(to_json(r));
  return j;
}

}  // namespace seqrec
