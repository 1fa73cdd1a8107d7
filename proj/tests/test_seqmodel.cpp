#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "seqrec/checkpoint.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/seqmodel.hpp"
#include "support.hpp"

using namespace seqrec;
using seqrec::testing::random_vector;

namespace {

ModelConfig small_config(EmbedMode mode = EmbedMode::ElementwiseMax, bool use_scene = true) {
  ModelConfig c;
  c.num_identities = 7;
  c.feature_dim = 5;
  c.scene_dim = 4;
  c.embed_dim = 6;
  c.hidden_dim = 6;
  c.mode = mode;
  c.use_scene = use_scene;
  return c;
}

SequenceItem random_item(const ModelConfig& c, std::size_t n, Rng& rng, std::size_t pad_to = 22) {
  SequenceItem item;
  item.scene = random_vector(c.scene_dim, rng);
  std::uniform_int_distribution<Label> label(1, c.num_identities);
  for (std::size_t t = 0; t < n; ++t) {
    item.features.push_back(random_vector(c.feature_dim, rng));
    item.labels.push_back(label(rng));
  }
  item.pad_to = pad_to;
  return item;
}

bool bit_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("initialization follows the documented scheme") {
  const ModelConfig c = small_config();
  const ModelParams p = ModelParams::initialize(c, 5);
  for (const auto* m : {&p.embedding.label_embed, &p.embedding.feature_embed, &p.embedding.scene_embed,
                        &p.lstm.input_weights, &p.lstm.hidden_weights, &p.classifier.weights}) {
    for (double v : m->values()) CHECK(std::abs(v) <= 0.08);
  }
  for (std::size_t i = 0; i < p.lstm.bias.size(); ++i) {
    const bool forget = i >= c.hidden_dim && i < 2 * c.hidden_dim;
    CHECK(p.lstm.bias[i] == (forget ? 1.0 : 0.0));
  }
  for (double b : p.classifier.bias) CHECK(b == 0.0);
  CHECK(ModelParams::initialize(c, 5) == p);
  CHECK_FALSE(ModelParams::initialize(c, 6) == p);
  CHECK(p.embedding.label_embed.cols() == c.num_identities + 1);
}

TEST_CASE("flatten and assign are inverse") {
  const ModelParams p = ModelParams::initialize(small_config(), 3);
  ModelParams q = p.zeros_like();
  q.assign(p.flatten());
  CHECK(q == p);
  CHECK(p.flatten().size() == p.parameter_count());
  CHECK_THROWS_AS(q.assign(Vector(3, 0.0)), ShapeError);
}

TEST_CASE("single step without scene equals the appearance-plus-start-token pipeline") {
  const ModelConfig c = small_config(EmbedMode::Addition, false);
  const ModelParams p = ModelParams::initialize(c, 9, 0.5);
  Rng rng(1);
  const SequenceItem item = random_item(c, 1, rng);
  const Vector x = joint_embed(p.embedding, kStartLabel, item.features[0]);
  const LstmStep step = lstm_step(p.lstm, LstmState::zeros(c.hidden_dim), x);
  const Distribution d = classify(p.classifier, step.output);
  const ForwardTrace trace = forward_train(p, item);
  CHECK(trace.distributions.size() == 1);
  CHECK(trace.distributions[0] == d);
  CHECK(trace.loss == nll(d, class_of(item.labels[0])));
}

TEST_CASE("loss is the sum of per-step nll and log-likelihood is its negation") {
  Rng rng(2);
  for (bool scene : {true, false}) {
    const ModelConfig c = small_config(EmbedMode::ElementwiseMax, scene);
    const ModelParams p = ModelParams::initialize(c, 4, 0.5);
    for (std::size_t n = 1; n <= 4; ++n) {
      const SequenceItem item = random_item(c, n, rng);
      const ForwardTrace trace = forward_train(p, item);
      REQUIRE(trace.distributions.size() == n);
      double sum = 0, log_sum = 0, product = 1;
      for (std::size_t t = 0; t < n; ++t) {
        const Distribution& d = trace.distributions[t];
        double total = 0;
        for (double v : d.probs()) total += v;
        CHECK(std::abs(total - 1.0) <= 1e-9);
        sum += nll(d, class_of(item.labels[t]));
        log_sum += std::log(d[class_of(item.labels[t])]);
        product *= d[class_of(item.labels[t])];
      }
      CHECK(trace.loss == doctest::Approx(sum).epsilon(1e-14));
      const double ll = log_likelihood(p, item);
      CHECK(ll == -trace.loss);
      CHECK(std::abs(ll - log_sum) <= 1e-12);
      CHECK(std::abs(std::exp(ll) - product) <= 1e-9 * product);
    }
  }
}

TEST_CASE("a zero model assigns -N ln K") {
  const ModelConfig c = small_config();
  const ModelParams p = ModelParams::zeros(c);
  Rng rng(3);
  for (std::size_t n = 1; n <= 5; ++n) {
    CHECK(log_likelihood(p, random_item(c, n, rng)) ==
          doctest::Approx(-static_cast<double>(n) * std::log(7.0)).epsilon(1e-12));
  }
}

TEST_CASE("appending an instance never increases the log-likelihood") {
  const ModelConfig c = small_config();
  const ModelParams p = ModelParams::initialize(c, 8, 0.5);
  Rng rng(4);
  SequenceItem item = random_item(c, 5, rng);
  double previous = 0.0;
  for (std::size_t n = 1; n <= 5; ++n) {
    SequenceItem prefix = item;
    prefix.features.resize(n);
    prefix.labels.resize(n);
    const double ll = log_likelihood(p, prefix);
    CHECK(ll <= previous);
    previous = ll;
  }
}

TEST_CASE("padding leaves loss and every gradient bit-identical") {
  Rng rng(5);
  for (EmbedMode mode : {EmbedMode::Addition, EmbedMode::ElementwiseMax}) {
    for (bool scene : {true, false}) {
      const ModelConfig c = small_config(mode, scene);
      const ModelParams p = ModelParams::initialize(c, 11, 0.3);
      for (std::size_t n = 1; n <= 5; ++n) {
        SequenceItem tight = random_item(c, n, rng, n);
        SequenceItem padded = tight;
        padded.pad_to = 22;
        const ForwardTrace a = forward_train(p, tight), b = forward_train(p, padded);
        CHECK(std::memcmp(&a.loss, &b.loss, sizeof(double)) == 0);
        CHECK(bit_equal(backward_train(p, a).flatten(), backward_train(p, b).flatten()));
      }
    }
  }
}

TEST_CASE("accumulating the same item twice doubles the gradient") {
  const ModelConfig c = small_config();
  const ModelParams p = ModelParams::initialize(c, 12, 0.3);
  Rng rng(6);
  const SequenceItem item = random_item(c, 3, rng);
  const ForwardTrace trace = forward_train(p, item);
  ModelParams twice = p.zeros_like();
  accumulate_gradients(p, trace, twice);
  accumulate_gradients(p, trace, twice);
  const Vector once = backward_train(p, trace).flatten();
  const Vector both = twice.flatten();
  // Summation order differs, so equality holds up to rounding.
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(both[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("without the scene step the scene projection gets no gradient and the scene is ignored") {
  const ModelConfig c = small_config(EmbedMode::ElementwiseMax, false);
  const ModelParams p = ModelParams::initialize(c, 13, 0.3);
  Rng rng(7);
  SequenceItem item = random_item(c, 3, rng);
  const ForwardTrace trace = forward_train(p, item);
  const ModelParams g = backward_train(p, trace);
  for (double v : g.embedding.scene_embed.values()) CHECK(v == 0.0);
  item.scene = random_vector(c.scene_dim, rng, 50.0);
  CHECK(forward_train(p, item).distributions == trace.distributions);

  const ModelConfig cs = small_config(EmbedMode::ElementwiseMax, true);
  const ModelParams ps = ModelParams::initialize(cs, 13, 0.3);
  const ModelParams gs = backward_train(ps, forward_train(ps, item));
  double norm = 0;
  for (double v : gs.embedding.scene_embed.values()) norm += std::abs(v);
  CHECK(norm > 0.0);
}

TEST_CASE("forward_train validates items") {
  const ModelConfig c = small_config();
  const ModelParams p = ModelParams::initialize(c, 1);
  Rng rng(8);
  SequenceItem item = random_item(c, 2, rng);
  item.labels[1] = 0;
  CHECK_THROWS_AS(forward_train(p, item), ValidationError);
  item.labels[1] = 8;
  CHECK_THROWS_AS(forward_train(p, item), ValidationError);
  SequenceItem longer = random_item(c, 4, rng, 3);
  CHECK_THROWS_AS(forward_train(p, longer), ValidationError);
  SequenceItem empty = random_item(c, 0, rng);
  CHECK_THROWS(forward_train(p, empty));
}

TEST_CASE("teacher forcing feeds true labels; the switch feeds predictions") {
  const ModelConfig c = small_config();
  const ModelParams p = ModelParams::initialize(c, 14, 0.5);
  Rng rng(9);
  const SequenceItem item = random_item(c, 4, rng);
  const ForwardTrace tf = forward_train(p, item);
  CHECK(tf.fed_labels[0] == kStartLabel);
  for (std::size_t t = 1; t < 4; ++t) CHECK(tf.fed_labels[t] == item.labels[t - 1]);
  const ForwardTrace fp = forward_train(p, item, ForwardOptions{true});
  CHECK(fp.fed_labels[0] == kStartLabel);
  for (std::size_t t = 1; t < 4; ++t) CHECK(fp.fed_labels[t] == label_of(fp.distributions[t - 1].argmax()));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const ModelConfig c = small_config(EmbedMode::Addition, false);
  Checkpoint ckpt;
  ckpt.model = ModelParams::initialize(c, 21, 0.7);
  ckpt.region = "head+upper";
  ckpt.vocab_fingerprint = 0xdeadbeefcafef00dULL;
  ckpt.train_split = 1;
  const std::string bytes = serialize_checkpoint(ckpt);
  CHECK(bytes.substr(0, 8) == "SQRCKPT1");
  CHECK(bytes[8] == 'L');
  const Checkpoint back = parse_checkpoint(bytes);
  CHECK(back == ckpt);
  CHECK(serialize_checkpoint(back) == bytes);

  Checkpoint app;
  AppearanceModel m = AppearanceModel::zeros(7, 5);
  Rng rng(3);
  for (double& v : m.classifier.weights.values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  app.model = m;
  CHECK(parse_checkpoint(serialize_checkpoint(app)) == app);
}

TEST_CASE("corrupted checkpoints are rejected") {
  Checkpoint ckpt;
  ckpt.model = ModelParams::initialize(small_config(), 2);
  const std::string bytes = serialize_checkpoint(ckpt);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bad), IoError);
  CHECK_THROWS_AS(parse_checkpoint(bytes + "trailing"), IoError);
}
