#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "seqrec/checkpoint.hpp"
#include "seqrec/cli.hpp"
#include "seqrec/data.hpp"
#include "seqrec/rng.hpp"
#include "seqrec/training.hpp"

using namespace seqrec;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("seqrec_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A tiny world that trains in well under a second. The defaults go first so that
// later --set flags override them.
std::vector<std::string> small(std::vector<std::string> args) {
  std::vector<std::string> defaults;
  for (const char* kv : {"num_identities=8", "num_groups=2", "num_scenes=2", "feature_dim=4",
                         "scene_feature_dim=3", "photos_per_split=60", "embed_dim=8",
                         "hidden_dim=8", "epochs=6", "decay_epoch=4", "learning_rate=0.01"}) {
    defaults.push_back("--set");
    defaults.push_back(kv);
  }
  args.insert(args.begin() + 1, defaults.begin(), defaults.end());
  return args;
}

fs::path make_data(const fs::path& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = small({"gen", "--out", dir.string()});
  args.insert(args.end(), extra.begin(), extra.end());
  const Run r = cli(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  return dir;
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

}  // namespace

TEST_CASE("gen writes a loadable, reproducible dataset") {
  const fs::path a = make_data(scratch("gen_a"));
  const fs::path b = make_data(scratch("gen_b"));
  for (const char* f : {"vocab.txt", "set_0.jsonl", "set_1.jsonl", "meta.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK_MESSAGE(read_file(a / f) == read_file(b / f), f);
  }
  const LabelVocabulary vocab = load_vocabulary(a / "vocab.txt");
  CHECK(vocab.num_identities() == 8);
  CHECK(load_dataset(a / "set_0.jsonl", vocab).size() == 60);
  CHECK(load_dataset(a / "set_1.jsonl", vocab).size() == 60);
  const fs::path c = make_data(scratch("gen_c"), {"--seed", "2"});
  CHECK(read_file(a / "set_0.jsonl") != read_file(c / "set_0.jsonl"));
}

TEST_CASE("gen rejects an empty split and writes nothing") {
  const fs::path dir = scratch("gen_empty") / "out";
  const Run r = cli(small({"gen", "--out", dir.string(), "--set", "photos_per_split=0"}));
  CHECK(r.code != 0);
  CHECK(r.err.find("photos_per_split") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "set_0.jsonl"));
}

TEST_CASE("unknown config keys abort every command") {
  const fs::path dir = scratch("unknown");
  const fs::path conf = dir / "bad.conf";
  write_file_atomic(conf, "noise_scale = 0.5\nnoise_scael = 0.4\n");
  for (const char* cmd : {"gen", "gradcheck", "report"}) {
    const Run r = cli({cmd, "--config", conf.string(), "--out", (dir / "o").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("noise_scael") != std::string::npos);
  }
  CHECK(cli({"gen", "--set", "bogus=1", "--out", (dir / "o").string()}).code != 0);
  CHECK_FALSE(fs::exists(dir / "o" / "set_0.jsonl"));
}

TEST_CASE("train with zero epochs stores the initial parameters, deterministically") {
  const fs::path data = make_data(scratch("train0_data"));
  const fs::path out1 = scratch("train0_a"), out2 = scratch("train0_b");
  for (const fs::path& o : {out1, out2}) {
    const Run r = cli(small({"train", "--data", data.string(), "--out", o.string(), "--set", "epochs=0",
                             "--seed", "7"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  CHECK(read_file(out1 / "model.ckpt") == read_file(out2 / "model.ckpt"));
  const Checkpoint c = load_checkpoint(out1 / "model.ckpt");
  REQUIRE(c.kind() == ModelKind::Sequence);
  const ModelParams& p = std::get<ModelParams>(c.model);
  TrainConfig tc;
  tc.embed_dim = 8;
  tc.hidden_dim = 8;
  const ModelConfig mc = model_config_for(tc, 8, 4, 3);
  const ModelParams init = ModelParams::initialize(mc, derive_seed(7, "init"), tc.init_scale);
  CHECK(p.flatten() == init.flatten());
  CHECK(c.train_split == 0);
  CHECK(c.vocab_fingerprint == load_vocabulary(data / "vocab.txt").fingerprint());
}

TEST_CASE("training reruns are byte identical") {
  const fs::path data = make_data(scratch("rerun_data"));
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  for (const fs::path& o : {a, b}) {
    REQUIRE(cli(small({"train", "--data", data.string(), "--out", o.string()})).code == 0);
    REQUIRE(cli(small({"eval", "--data", data.string(), "--checkpoint", (o / "model.ckpt").string(),
                       "--out", o.string()}))
                .code == 0);
  }
  for (const char* f : {"model.ckpt", "train_log.txt", "metrics.json", "predictions.jsonl"}) {
    CHECK_MESSAGE(read_file(a / f) == read_file(b / f), f);
  }
  const json log = read_json(a / "train_report.json");
  CHECK(log.at("kind") == "train_report");
  CHECK(log.at("epoch_loss").size() == 6);
}

TEST_CASE("train with a missing dataset fails without writing a checkpoint") {
  const fs::path out = scratch("missing");
  const Run r = cli(small({"train", "--data", (out / "nowhere").string(), "--out", out.string()}));
  CHECK(r.code != 0);
  CHECK(r.err.rfind("error:", 0) == 0);
  CHECK_FALSE(fs::exists(out / "model.ckpt"));
}

TEST_CASE("a model does better on the split it was trained on") {
  const fs::path data = make_data(scratch("fit_data"), {"--set", "noise_scale=1.5"});
  const fs::path out = scratch("fit");
  REQUIRE(cli(small({"train", "--data", data.string(), "--out", out.string(), "--set", "epochs=60",
                     "--set", "decay_epoch=50"}))
              .code == 0);
  const std::string ckpt = (out / "model.ckpt").string();
  REQUIRE(cli(small({"eval", "--data", data.string(), "--checkpoint", ckpt, "--out",
                     (out / "held").string()}))
              .code == 0);
  REQUIRE(cli(small({"eval", "--data", data.string(), "--checkpoint", ckpt, "--set", "eval_split=0",
                     "--out", (out / "seen").string()}))
              .code == 0);
  const double held = read_json(out / "held" / "metrics.json").at("acc_overall");
  const double seen = read_json(out / "seen" / "metrics.json").at("acc_overall");
  CHECK(seen > held);
}

TEST_CASE("averaging a checkpoint with itself changes nothing") {
  const fs::path data = make_data(scratch("self_data"), {"--set", "regions=head,upper"});
  const fs::path out = scratch("self");
  REQUIRE(cli(small({"train", "--data", data.string(), "--out", out.string()})).code == 0);
  const std::string ckpt = (out / "model.ckpt").string();
  REQUIRE(cli(small({"eval", "--data", data.string(), "--checkpoint", ckpt, "--out",
                     (out / "one").string()}))
              .code == 0);
  const Run r = cli(small({"eval", "--data", data.string(), "--checkpoint", ckpt, "--checkpoint",
                           ckpt, "--fusion", "avg", "--out", (out / "two").string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json one = read_json(out / "one" / "metrics.json");
  const json two = read_json(out / "two" / "metrics.json");
  CHECK(two.at("fusion") == "avg");
  CHECK(one.at("acc_overall") == two.at("acc_overall"));
  // Fused records also count the orderings of every region; all else must match.
  std::istringstream a(read_file(out / "one" / "predictions.jsonl"));
  std::istringstream b(read_file(out / "two" / "predictions.jsonl"));
  std::string la, lb;
  std::size_t lines = 0;
  while (std::getline(a, la) && std::getline(b, lb)) {
    json ja = json::parse(la), jb = json::parse(lb);
    CHECK(jb.at("orderings_used") == 2 * ja.at("orderings_used").get<std::size_t>());
    ja.erase("orderings_used");
    jb.erase("orderings_used");
    CHECK(ja == jb);
    ++lines;
  }
  CHECK(lines > 0);

  // --region retargets a checkpoint, and a head model cannot read upper+head features.
  const Run bad = cli(small({"eval", "--data", data.string(), "--checkpoint", ckpt, "--region",
                             "head+upper", "--out", (out / "bad").string()}));
  CHECK(bad.code != 0);
  CHECK(bad.err.find("dimension") != std::string::npos);
}

TEST_CASE("the ordering budget is irrelevant for single-instance photos") {
  const fs::path data =
      make_data(scratch("singles_data"), {"--set", "min_instances=1", "--set", "max_instances=1"});
  const fs::path out = scratch("singles");
  REQUIRE(cli(small({"train", "--data", data.string(), "--out", out.string()})).code == 0);
  const std::string ckpt = (out / "model.ckpt").string();
  for (const char* b : {"1", "24"}) {
    REQUIRE(cli(small({"eval", "--data", data.string(), "--checkpoint", ckpt, "--budget", b, "--out",
                       (out / b).string()}))
                .code == 0);
  }
  CHECK(read_file(out / "1" / "predictions.jsonl") == read_file(out / "24" / "predictions.jsonl"));
  const json m = read_json(out / "1" / "metrics.json");
  CHECK(m.at("acc_multi").is_null());
}

TEST_CASE("eval rejects a feature dimension mismatch") {
  const fs::path data = make_data(scratch("dim_data"));
  const fs::path other = make_data(scratch("dim_other"), {"--set", "feature_dim=6"});
  const fs::path out = scratch("dim");
  REQUIRE(cli(small({"train", "--data", data.string(), "--out", out.string()})).code == 0);
  const Run r = cli(small({"eval", "--data", other.string(), "--checkpoint",
                           (out / "model.ckpt").string(), "--out", out.string()}));
  CHECK(r.code != 0);
  CHECK(r.err.find("dimension") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "metrics.json"));
}

TEST_CASE("ablate prints a three by three table") {
  const fs::path out = scratch("ablate");
  const Run r = cli(small({"ablate", "--out", out.string()}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json j = read_json(out / "ablation.json");
  REQUIRE(j.at("rows").size() == 3);
  CHECK(j.at("rows")[0].at("method") == "appearance-only");
  CHECK(j.at("rows")[1].at("method") == "ours-relation");
  CHECK(j.at("rows")[2].at("method") == "ours");
  for (const json& row : j.at("rows")) {
    CHECK(row.contains("acc_overall"));
    CHECK(row.contains("acc_multi"));
    CHECK(row.contains("acc_single"));
  }
  CHECK(r.out.find("appearance-only") != std::string::npos);
}

TEST_CASE("gradcheck passes and its negative control fails") {
  const fs::path out = scratch("gradcheck");
  const Run ok = cli({"gradcheck", "--set", "gradcheck_seeds=2", "--set", "gradcheck_dim=3", "--out",
                      out.string()});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  CHECK(read_json(out / "gradcheck.json").at("passed") == true);
  const Run bad = cli({"gradcheck", "--set", "gradcheck_seeds=2", "--set", "gradcheck_dim=3", "--set",
                       "gradcheck_corrupt=classifier"});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("FAIL classifier") != std::string::npos);
}

TEST_CASE("report merges, deduplicates and summarizes runs") {
  const fs::path base = scratch("report");
  std::vector<std::string> metrics;
  for (const char* seed : {"1", "2", "3"}) {
    const fs::path d = base / seed;
    make_data(d / "data", {"--seed", "1"});
    REQUIRE(cli(small({"train", "--data", (d / "data").string(), "--out", d.string(), "--seed", seed}))
                .code == 0);
    REQUIRE(cli(small({"eval", "--data", (d / "data").string(), "--checkpoint",
                       (d / "model.ckpt").string(), "--out", d.string(), "--seed", seed}))
                .code == 0);
    metrics.push_back((d / "metrics.json").string());
  }

  const Run single = cli({"report", metrics[0], "--out", (base / "r1").string()});
  REQUIRE_MESSAGE(single.code == 0, single.err);
  const json r1 = read_json(base / "r1" / "report.json");
  CHECK(r1.at("rows").size() == 1);
  CHECK(r1.at("rows")[0].at("acc_overall").at("std") == 0.0);

  const Run dup = cli({"report", metrics[0], metrics[0], "--out", (base / "r2").string()});
  REQUIRE(dup.code == 0);
  const json r2 = read_json(base / "r2" / "report.json");
  CHECK(r2.at("rows")[0].at("runs") == 1);
  CHECK(r2.at("rows")[0].at("occurrences") == 2);

  const Run three = cli({"report", metrics[0], metrics[1], metrics[2], (base / "1" / "train_report.json").string(),
                         "--out", (base / "r3").string()});
  REQUIRE(three.code == 0);
  const json r3 = read_json(base / "r3" / "report.json");
  std::vector<double> acc;
  for (const std::string& m : metrics) acc.push_back(read_json(m).at("acc_overall"));
  const double mean = (acc[0] + acc[1] + acc[2]) / 3.0;
  double ss = 0.0;
  for (double a : acc) ss += (a - mean) * (a - mean);
  const json cell = r3.at("rows")[0].at("acc_overall");
  CHECK(cell.at("runs") == 3);
  CHECK(cell.at("mean").get<double>() == doctest::Approx(mean).epsilon(1e-12));
  CHECK(cell.at("std").get<double>() == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(1e-12));
  CHECK(fs::exists(base / "r3" / "loss.dat"));
  CHECK(fs::exists(base / "r3" / "accuracy.dat"));

  // A dataset with other identity names has another vocabulary fingerprint.
  const fs::path other = base / "other";
  make_data(other / "data", {"--set", "num_identities=9"});
  REQUIRE(cli(small({"train", "--data", (other / "data").string(), "--out", other.string(), "--set",
                     "num_identities=9"}))
              .code == 0);
  REQUIRE(cli(small({"eval", "--data", (other / "data").string(), "--checkpoint",
                     (other / "model.ckpt").string(), "--out", other.string()}))
              .code == 0);
  const Run mixed = cli({"report", metrics[0], (other / "metrics.json").string(), "--out",
                         (base / "r4").string()});
  CHECK(mixed.code != 0);
  CHECK(mixed.err.find("vocabular") != std::string::npos);
}

TEST_CASE("the installed binary reports failure through its exit status") {
  const char* bin = std::getenv("SEQREC_BIN");
  REQUIRE(bin != nullptr);
  const fs::path out = scratch("binary");
  const std::string ok = std::string("\"") + bin + "\" gradcheck --set gradcheck_seeds=1 --set gradcheck_dim=3 > " +
                         (out / "ok.txt").string();
  CHECK(std::system(ok.c_str()) == 0);
  const std::string bad = std::string("\"") + bin + "\" train --data " + (out / "nowhere").string() +
                          " --out " + out.string() + " 2> " + (out / "err.txt").string();
  CHECK(std::system(bad.c_str()) != 0);
  CHECK(read_file(out / "err.txt").find("error:") != std::string::npos);
}
