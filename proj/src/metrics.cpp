#include "seqrec/metrics.hpp"

#include "seqrec/errors.hpp"

namespace seqrec {

using nlohmann::json;

namespace {

std::optional<double> ratio(std::size_t correct, std::size_t count) {
  if (count == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(count);
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      total += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

double AccuracyMetrics::acc_overall() const { return ratio(correct_overall, count_overall).value_or(0.0); }
std::optional<double> AccuracyMetrics::acc_multi() const { return ratio(correct_multi, count_multi); }
std::optional<double> AccuracyMetrics::acc_single() const { return ratio(correct_single, count_single); }

AccuracyMetrics evaluate(std::span<const std::vector<Label>> truth,
                         std::span<const PredictionResult> predictions) {
  if (truth.size() != predictions.size()) {
    throw ValidationError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(truth.size()) + " photos");
  }
  AccuracyMetrics m;
  for (std::size_t p = 0; p < truth.size(); ++p) {
    const auto& labels = truth[p];
    if (predictions[p].labels.size() != labels.size()) {
      throw ValidationError("evaluate: photo " + std::to_string(p) + " has " +
                            std::to_string(labels.size()) + " instances but " +
                            std::to_string(predictions[p].labels.size()) + " predictions");
    }
    const bool multi = labels.size() >= 2;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool hit = predictions[p].labels[i] == labels[i];
      ++m.count_overall;
      m.correct_overall += hit;
      if (multi) {
        ++m.count_multi;
        m.correct_multi += hit;
      } else {
        ++m.count_single;
        m.correct_single += hit;
      }
    }
  }
  return m;
}

AccuracyMetrics evaluate(std::span<const PhotoRecord> truth,
                         std::span<const PredictionResult> predictions) {
  std::vector<std::vector<Label>> labels;
  labels.reserve(truth.size());
  for (const PhotoRecord& photo : truth) {
    std::vector<Label>& l = labels.emplace_back();
    for (const Instance& inst : photo.instances) l.push_back(inst.label);
  }
  return evaluate(labels, predictions);
}

MetricsReport combine_directions(std::vector<DirectionMetrics> directions) {
  if (directions.empty()) throw ValidationError("combine_directions: no directions");
  MetricsReport r;
  double total = 0.0;
  std::vector<std::optional<double>> multi, single;
  for (const DirectionMetrics& d : directions) {
    total += d.metrics.acc_overall();
    multi.push_back(d.metrics.acc_multi());
    single.push_back(d.metrics.acc_single());
  }
  r.acc_overall = total / static_cast<double>(directions.size());
  r.acc_multi = mean_defined(multi);
  r.acc_single = mean_defined(single);
  r.directions = std::move(directions);
  return r;
}

json to_json(const MetricsReport& report) {
  json dirs = json::array();
  for (const DirectionMetrics& d : report.directions) {
    const AccuracyMetrics& m = d.metrics;
    dirs.push_back({{"direction", d.name},
                    {"acc_overall", m.acc_overall()},
                    {"acc_multi", optional_json(m.acc_multi())},
                    {"acc_single", optional_json(m.acc_single())},
                    {"count_overall", m.count_overall},
                    {"correct_overall", m.correct_overall},
                    {"count_multi", m.count_multi},
                    {"correct_multi", m.correct_multi},
                    {"count_single", m.count_single},
                    {"correct_single", m.correct_single}});
  }
  return json{{"kind", "metrics"},
              {"method", report.method},
              {"region", report.region},
              {"fusion", report.fusion},
              {"num_identities", report.num_identities},
              {"vocab_fingerprint", report.vocab_fingerprint},
              {"directions", std::move(dirs)},
              {"acc_overall", report.acc_overall},
              {"acc_multi", optional_json(report.acc_multi)},
              {"acc_single", optional_json(report.acc_single)}};
}

MetricsReport metrics_from_json(const json& j) {
  if (j.value("kind", "") != "metrics") throw ValidationError("not a metrics document");
  MetricsReport r;
  r.method = j.at("method").get<std::string>();
  r.region = j.at("region").get<std::string>();
  r.fusion = j.at("fusion").get<std::string>();
  r.num_identities = j.at("num_identities").get<std::size_t>();
  r.vocab_fingerprint = j.at("vocab_fingerprint").get<std::uint64_t>();
  for (const json& d : j.at("directions")) {
    DirectionMetrics dm;
    dm.name = d.at("direction").get<std::string>();
    dm.metrics.count_overall = d.at("count_overall").get<std::size_t>();
    dm.metrics.correct_overall = d.at("correct_overall").get<std::size_t>();
    dm.metrics.count_multi = d.at("count_multi").get<std::size_t>();
    dm.metrics.correct_multi = d.at("correct_multi").get<std::size_t>();
    dm.metrics.count_single = d.at("count_single").get<std::size_t>();
    dm.metrics.correct_single = d.at("correct_single").get<std::size_t>();
    r.directions.push_back(std::move(dm));
  }
  r.acc_overall = j.at("acc_overall").get<double>();
  r.acc_multi = optional_from(j.at("acc_multi"));
  r.acc_single = optional_from(j.at("acc_single"));
  return r;
}

}  // namespace seqrec
