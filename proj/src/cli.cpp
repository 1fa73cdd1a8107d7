#include "seqrec/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqrec/checkpoint.hpp"
#include "seqrec/config.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/experiment.hpp"
#include "seqrec/gradcheck.hpp"
#include "seqrec/rng.hpp"
#include "seqrec/synthetic.hpp"

namespace seqrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kTopK = 5;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool out_given = false;
  std::vector<std::string> overrides;
  std::string data_dir;
  std::vector<std::string> checkpoints;
  std::optional<std::size_t> budget;
  std::string fusion;
  std::vector<std::string> regions;
  std::vector<std::string> inputs;
};

// File values first, then --set, then the dedicated flags.
ExperimentConfig resolve_config(const CommonOptions& o) {
  KeyValues kv;
  if (!o.config_path.empty()) kv = load_key_values(o.config_path);
  for (const std::string& s : o.overrides) kv.push_back(parse_override(s));
  ExperimentConfig cfg = make_config(kv);
  if (o.seed) apply_key(cfg, "seed", std::to_string(*o.seed));
  if (o.budget) apply_key(cfg, "budget", std::to_string(*o.budget));
  if (!o.fusion.empty()) apply_key(cfg, "fusion", o.fusion);
  return cfg;
}

fs::path prepare_out(const CommonOptions& o) {
  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

fs::path split_path(const fs::path& dir, int split) {
  return dir / ("set_" + std::to_string(split) + ".jsonl");
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

struct SplitStats {
  std::size_t photos = 0;
  std::size_t instances = 0;
  std::size_t identities = 0;
  std::size_t multi_photos = 0;
  std::size_t multi_instances = 0;
};

SplitStats split_stats(std::span<const PhotoRecord> photos) {
  SplitStats s;
  std::set<Label> seen;
  for (const PhotoRecord& p : photos) {
    ++s.photos;
    s.instances += p.instances.size();
    if (p.instances.size() >= 2) {
      ++s.multi_photos;
      s.multi_instances += p.instances.size();
    }
    for (const Instance& inst : p.instances) seen.insert(inst.label);
  }
  s.identities = seen.size();
  return s;
}

std::string stats_table(const SplitPair& splits) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-7s %8s %10s %11s %13s %16s\n", "split", "photos", "instances",
                "identities", "multi_photos", "multi_instances");
  os << buf;
  for (int s : {0, 1}) {
    const SplitStats st = split_stats(splits[s]);
    std::snprintf(buf, sizeof buf, "%-7s %8zu %10zu %11zu %13zu %16zu\n",
                  ("set_" + std::to_string(s)).c_str(), st.photos, st.instances, st.identities,
                  st.multi_photos, st.multi_instances);
    os << buf;
  }
  return os.str();
}

int cmd_gen(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  cfg.gen.validate();
  const SyntheticWorld world = generate_synthetic(cfg.gen);
  const fs::path dir = prepare_out(o);
  save_vocabulary(dir / "vocab.txt", world.vocab);
  save_dataset(split_path(dir, 0), world.splits.set_0, world.vocab);
  save_dataset(split_path(dir, 1), world.splits.set_1, world.vocab);
  json meta;
  meta["kind"] = "generator";
  meta["config"] = to_json(cfg.gen);
  meta["metadata"] = to_json(world.metadata);
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
  out << stats_table(world.splits);
  out << "wrote " << dir.string() << "/{set_0.jsonl,set_1.jsonl,vocab.txt,meta.json}\n";
  return 0;
}

struct Dataset {
  LabelVocabulary vocab;
  std::optional<std::vector<PhotoRecord>> sets[2];

  const std::vector<PhotoRecord>& split(const fs::path& dir, int s) {
    if (!sets[s]) sets[s] = load_dataset(split_path(dir, s), vocab);
    return *sets[s];
  }
};

fs::path require_data(const CommonOptions& o) {
  if (o.data_dir.empty()) throw ConfigError("--data DIR is required");
  return fs::path(o.data_dir);
}

int cmd_train(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  cfg.train.validate();
  const fs::path data = require_data(o);
  Dataset ds{load_vocabulary(data / "vocab.txt"), {}};
  const std::vector<PhotoRecord>& photos = ds.split(data, cfg.train_split);
  TrainedModel trained = train_model(photos, ds.vocab, cfg.train, cfg.train_split);

  const fs::path dir = prepare_out(o);
  const fs::path ckpt_path = dir / "model.ckpt";
  // Relative to the report itself, so reruns into other directories stay byte-identical.
  trained.report.checkpoint = ckpt_path.filename().string();
  save_checkpoint(ckpt_path, trained.checkpoint);
  write_file_atomic(dir / "train_report.json", to_json(trained.report).dump(2) + "\n");
  std::ostringstream log;
  for (std::size_t e = 0; e < trained.report.epoch_loss.size(); ++e) {
    log << "epoch " << e << " lr " << fmt("%.6g", lr_schedule(cfg.train, e)) << " loss "
        << fmt("%.10g", trained.report.epoch_loss[e]) << "\n";
  }
  write_file_atomic(dir / "train_log.txt", log.str());
  out << "trained " << to_string(method_of(trained.checkpoint)) << " on set_" << cfg.train_split
      << " (" << photos.size() << " photos, " << cfg.train.total_epochs << " epochs)\n";
  if (!trained.report.epoch_loss.empty()) {
    out << "final epoch loss " << fmt("%.6f", trained.report.epoch_loss.back()) << "\n";
  }
  out << "wrote " << ckpt_path.string() << "\n";
  return 0;
}

json top_k(const Vector& scores, const LabelVocabulary& vocab) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::size_t k = std::min(kTopK, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  json arr = json::array();
  for (std::size_t i = 0; i < k; ++i) {
    arr.push_back({{"label", vocab.name(label_of(idx[i]))}, {"score", scores[idx[i]]}});
  }
  return arr;
}

int cmd_eval(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  if (o.checkpoints.empty()) throw ConfigError("--checkpoint PATH is required");
  if (!o.regions.empty() && o.regions.size() != o.checkpoints.size()) {
    throw ConfigError("--region must be given once per --checkpoint");
  }
  const fs::path data = require_data(o);
  Dataset ds{load_vocabulary(data / "vocab.txt"), {}};

  std::vector<Checkpoint> ckpts;
  for (std::size_t i = 0; i < o.checkpoints.size(); ++i) {
    Checkpoint c = load_checkpoint(o.checkpoints[i]);
    if (c.vocab_fingerprint != ds.vocab.fingerprint()) {
      throw ValidationError("checkpoint " + o.checkpoints[i] +
                            " was trained with a different label vocabulary");
    }
    if (!o.regions.empty()) c.region = RegionSpec::parse(o.regions[i]).to_string();
    ckpts.push_back(std::move(c));
  }

  // One direction per training split; checkpoints sharing a split are region-fused.
  std::map<int, std::vector<std::size_t>> by_split;
  for (std::size_t i = 0; i < ckpts.size(); ++i) by_split[ckpts[i].train_split].push_back(i);
  if (by_split.size() > 1 && cfg.eval.eval_split) {
    throw ConfigError("eval_split cannot be set when checkpoints cover both training splits");
  }
  for (const auto& [s, members] : by_split) {
    if (by_split.size() > 1 && s != 0 && s != 1) {
      throw ValidationError("checkpoint with unknown training split in a two-direction evaluation");
    }
    const Method m = method_of(ckpts[members.front()]);
    for (std::size_t i : members) {
      if (method_of(ckpts[i]) != m) throw ValidationError("cannot fuse checkpoints of different methods");
    }
  }

  std::vector<DirectionMetrics> directions;
  std::string preds_text;
  std::string region_label;
  for (const auto& [train_split, members] : by_split) {
    const int eval_split =
        cfg.eval.eval_split ? *cfg.eval.eval_split : (train_split == 0 ? 1 : train_split == 1 ? 0 : 1);
    const std::vector<PhotoRecord>& photos = ds.split(data, eval_split);
    std::vector<std::vector<PredictionResult>> per_region;
    region_label.clear();
    for (std::size_t i : members) {
      const std::vector<PhotoFeatures> feats =
          extract_features(photos, RegionSpec::parse(ckpts[i].region));
      per_region.push_back(predict_with(ckpts[i], feats, cfg.eval.budget,
                                        derive_seed(cfg.train.seed, "eval", train_split)));
      region_label += (region_label.empty() ? "" : ",") + ckpts[i].region;
    }
    const std::vector<PredictionResult> preds =
        per_region.size() == 1 ? per_region.front() : fuse_region_predictions(per_region, cfg.eval.fusion);
    const std::string name =
        (train_split >= 0 ? std::to_string(train_split) : std::string("?")) + "->" +
        std::to_string(eval_split);
    directions.push_back(DirectionMetrics{name, evaluate(photos, preds)});
    for (std::size_t p = 0; p < photos.size(); ++p) {
      for (std::size_t j = 0; j < photos[p].instances.size(); ++j) {
        json rec;
        rec["direction"] = name;
        rec["photo_id"] = photos[p].photo_id;
        rec["instance_id"] = photos[p].instances[j].instance_id;
        rec["true_label"] = ds.vocab.name(photos[p].instances[j].label);
        rec["predicted_label"] = ds.vocab.name(preds[p].labels[j]);
        rec["top_k"] = top_k(preds[p].fused[j], ds.vocab);
        rec["orderings_used"] = preds[p].orderings_used[j];
        preds_text += rec.dump() + "\n";
      }
    }
  }

  MetricsReport report = combine_directions(std::move(directions));
  report.method = to_string(method_of(ckpts.front()));
  report.region = region_label;
  report.fusion = by_split.begin()->second.size() > 1 ? to_string(cfg.eval.fusion) : "none";
  report.num_identities = ds.vocab.num_identities();
  report.vocab_fingerprint = ds.vocab.fingerprint();

  const fs::path dir = prepare_out(o);
  write_file_atomic(dir / "predictions.jsonl", preds_text);
  write_file_atomic(dir / "metrics.json", to_json(report).dump(2) + "\n");
  out << format_ablation(std::span<const MetricsReport>(&report, 1));
  for (const DirectionMetrics& d : report.directions) {
    out << "  " << d.name << " acc_overall " << fmt("%.2f", 100.0 * d.metrics.acc_overall())
        << "\n";
  }
  out << "wrote " << (dir / "metrics.json").string() << "\n";
  return 0;
}

int cmd_ablate(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  cfg.train.validate();
  SplitPair splits;
  LabelVocabulary vocab;
  if (!o.data_dir.empty()) {
    const fs::path data(o.data_dir);
    Dataset ds{load_vocabulary(data / "vocab.txt"), {}};
    splits.set_0 = ds.split(data, 0);
    splits.set_1 = ds.split(data, 1);
    vocab = ds.vocab;
  } else {
    cfg.gen.validate();
    SyntheticWorld world = generate_synthetic(cfg.gen);
    splits = std::move(world.splits);
    vocab = std::move(world.vocab);
  }
  const std::vector<MetricsReport> rows = run_ablation(splits, vocab, cfg.train, cfg.eval.budget);
  const fs::path dir = prepare_out(o);
  const std::string table = format_ablation(rows);
  write_file_atomic(dir / "ablation.txt", table);
  write_file_atomic(dir / "ablation.json", ablation_to_json(rows).dump(2) + "\n");
  out << table;
  return 0;
}

int cmd_gradcheck(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(o);
  GradcheckOptions opt;
  opt.dim = cfg.gradcheck.dim;
  opt.seeds.clear();
  for (std::size_t i = 0; i < cfg.gradcheck.seeds; ++i) opt.seeds.push_back(cfg.seed + i);
  opt.zero_init = cfg.gradcheck.zero_init;
  opt.corrupt = cfg.gradcheck.corrupt;
  const GradcheckReport report = run_gradcheck(opt);
  json j;
  j["kind"] = "gradcheck";
  j["dim"] = opt.dim;
  j["seeds"] = opt.seeds;
  j["tolerance"] = opt.tolerance;
  j["passed"] = report.passed;
  j["entries"] = json::array();
  for (const GradcheckEntry& e : report.entries) {
    out << (e.passed ? "PASS " : "FAIL ") << e.name << " max_rel_error "
        << fmt("%.3e", e.max_rel_error) << " (" << e.coordinates << " coordinates)\n";
    j["entries"].push_back({{"name", e.name},
                            {"max_rel_error", e.max_rel_error},
                            {"coordinates", e.coordinates},
                            {"passed", e.passed}});
  }
  out << (report.passed ? "gradcheck passed" : "gradcheck FAILED") << " (" << opt.seeds.size()
      << " seeds, dim " << opt.dim << ", tolerance " << fmt("%.0e", opt.tolerance) << ")\n";
  if (o.out_given) write_file_atomic(prepare_out(o) / "gradcheck.json", j.dump(2) + "\n");
  return report.passed ? 0 : 1;
}

struct ReportGroup {
  std::string method;
  std::string region;
  std::string fusion;
  std::vector<std::string> distinct;  // serialized runs, for deduplication
  std::vector<MetricsReport> runs;
  std::size_t occurrences = 0;
};

struct Spread {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

// Sample standard deviation; 0 for a single run.
Spread spread(const std::vector<double>& xs) {
  Spread s;
  s.n = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::string cell(const Spread& s) {
  if (s.n == 0) return "-";
  return fmt("%.2f", 100.0 * s.mean) + " +- " + fmt("%.2f", 100.0 * s.stddev);
}

json spread_json(const Spread& s) {
  if (s.n == 0) return nullptr;
  return {{"mean", s.mean}, {"std", s.stddev}, {"runs", s.n}};
}

int cmd_report(const CommonOptions& o, std::ostream& out) {
  resolve_config(o);
  if (o.inputs.empty()) throw ConfigError("report needs at least one input file");
  std::vector<ReportGroup> groups;
  std::vector<std::vector<double>> losses;
  std::optional<std::uint64_t> fingerprint;

  auto add = [&](const MetricsReport& m, const std::string& source) {
    if (fingerprint && *fingerprint != m.vocab_fingerprint) {
      throw ValidationError("incompatible vocabularies: " + source +
                            " was produced with a different label vocabulary");
    }
    fingerprint = m.vocab_fingerprint;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const ReportGroup& g) {
      return g.method == m.method && g.region == m.region && g.fusion == m.fusion;
    });
    if (it == groups.end()) {
      groups.push_back(ReportGroup{m.method, m.region, m.fusion, {}, {}, 0});
      it = std::prev(groups.end());
    }
    ++it->occurrences;
    const std::string key = to_json(m).dump();
    if (std::find(it->distinct.begin(), it->distinct.end(), key) == it->distinct.end()) {
      it->distinct.push_back(key);
      it->runs.push_back(m);
    }
  };

  for (const std::string& path : o.inputs) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw IoError(path + ": " + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "metrics") {
      add(metrics_from_json(j), path);
    } else if (kind == "ablation") {
      for (const json& row : j.at("rows")) add(metrics_from_json(row), path);
    } else if (kind == "train_report") {
      losses.push_back(j.at("epoch_loss").get<std::vector<double>>());
    } else {
      throw IoError(path + ": unrecognized file kind '" + kind + "'");
    }
  }

  std::ostringstream table;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %-12s %-6s %5s %8s %18s %18s %18s\n", "method", "region",
                "fusion", "runs", "repeats", "acc_overall", "acc_multi", "acc_single");
  table << buf;
  json rep;
  rep["kind"] = "report";
  rep["rows"] = json::array();
  std::ostringstream acc_dat;
  acc_dat << "# index method region fusion acc_overall acc_multi acc_single (means; nan = absent)\n";
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const ReportGroup& g = groups[gi];
    std::vector<double> overall, multi, single;
    for (const MetricsReport& m : g.runs) {
      overall.push_back(m.acc_overall);
      if (m.acc_multi) multi.push_back(*m.acc_multi);
      if (m.acc_single) single.push_back(*m.acc_single);
    }
    const Spread so = spread(overall), sm = spread(multi), ss = spread(single);
    std::snprintf(buf, sizeof buf, "%-16s %-12s %-6s %5zu %8zu %18s %18s %18s\n", g.method.c_str(),
                  g.region.c_str(), g.fusion.c_str(), g.runs.size(),
                  g.occurrences - g.runs.size(), cell(so).c_str(), cell(sm).c_str(),
                  cell(ss).c_str());
    table << buf;
    rep["rows"].push_back({{"method", g.method},
                           {"region", g.region},
                           {"fusion", g.fusion},
                           {"runs", g.runs.size()},
                           {"occurrences", g.occurrences},
                           {"acc_overall", spread_json(so)},
                           {"acc_multi", spread_json(sm)},
                           {"acc_single", spread_json(ss)}});
    auto mean_or_nan = [](const Spread& s) { return s.n ? fmt("%.10g", s.mean) : std::string("nan"); };
    acc_dat << gi << " " << g.method << " " << g.region << " " << g.fusion << " "
            << mean_or_nan(so) << " " << mean_or_nan(sm) << " " << mean_or_nan(ss) << "\n";
  }

  const fs::path dir = prepare_out(o);
  write_file_atomic(dir / "report.txt", table.str());
  write_file_atomic(dir / "report.json", rep.dump(2) + "\n");
  write_file_atomic(dir / "accuracy.dat", acc_dat.str());
  if (!losses.empty()) {
    std::ostringstream loss_dat;
    loss_dat << "# epoch";
    for (std::size_t r = 0; r < losses.size(); ++r) loss_dat << " loss_run" << r;
    loss_dat << "\n";
    std::size_t epochs = 0;
    for (const auto& l : losses) epochs = std::max(epochs, l.size());
    for (std::size_t e = 0; e < epochs; ++e) {
      loss_dat << e;
      for (const auto& l : losses) loss_dat << " " << (e < l.size() ? fmt("%.10g", l[e]) : "nan");
      loss_dat << "\n";
    }
    write_file_atomic(dir / "loss.dat", loss_dat.str());
  }
  out << table.str();
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sequential person recognition: data generation, training, evaluation"};
  app.require_subcommand(1);
  CommonOptions o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "root seed (sets every seed key)");
    sub->add_option_function<std::string>(
        "--out", [&](const std::string& v) { o.out_dir = v; o.out_given = true; },
        "output directory");
    sub->add_option("--set", o.overrides, "KEY=VALUE override, repeatable")->allow_extra_args(false);
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic split pair");
  common(gen);
  CLI::App* train = app.add_subcommand("train", "train one model on one split");
  common(train);
  train->add_option("--data", o.data_dir, "dataset directory")->required();
  CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints on the held split");
  common(eval);
  eval->add_option("--data", o.data_dir, "dataset directory")->required();
  eval->add_option("--checkpoint", o.checkpoints, "checkpoint file, repeatable")->required();
  eval->add_option("--budget", o.budget, "orderings per query instance");
  eval->add_option("--fusion", o.fusion, "region fusion: avg|max");
  eval->add_option("--region", o.regions, "region of the matching checkpoint, repeatable");
  CLI::App* ablate = app.add_subcommand("ablate", "appearance-only vs ours-relation vs ours");
  common(ablate);
  ablate->add_option("--data", o.data_dir, "dataset directory (default: generate from config)");
  ablate->add_option("--budget", o.budget, "orderings per query instance");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  common(gradcheck);
  CLI::App* report = app.add_subcommand("report", "merge metrics files into one table");
  common(report);
  report->add_option("inputs", o.inputs, "metrics.json / ablation.json / train_report.json files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen->parsed()) return cmd_gen(o, out);
    if (train->parsed()) return cmd_train(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (ablate->parsed()) return cmd_ablate(o, out);
    if (gradcheck->parsed()) return cmd_gradcheck(o, out);
    if (report->parsed()) return cmd_report(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace seqrec
