#include "seqrec/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <tuple>
#include <random>

#include "seqrec/errors.hpp"
#include "seqrec/layers.hpp"
#include "seqrec/rng.hpp"
#include "seqrec/seqmodel.hpp"

namespace seqrec {

namespace {

// A named set of parameters exposed as one flat vector, with a loss and its analytic gradient.
struct Problem {
  Vector point;
  std::function<double(std::span<const double>)> loss;
  std::function<Vector(std::span<const double>)> gradient;
};

Vector random_vector(std::size_t n, Rng& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(n);
  for (double& x : v) x = u(rng);
  return v;
}

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale) {
  return DenseMatrix(r, c, random_vector(r * c, rng, scale));
}

// Copies consecutive slices of `flat` into the given destinations.
void scatter(std::span<const double> flat, std::initializer_list<std::span<double>> dests) {
  std::size_t off = 0;
  for (std::span<double> d : dests) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), d.size(), d.begin());
    off += d.size();
  }
}

Vector gather(std::initializer_list<std::span<const double>> srcs) {
  Vector out;
  for (auto s : srcs) out.insert(out.end(), s.begin(), s.end());
  return out;
}

Problem embed_problem(std::size_t dim, EmbedMode mode, Rng& rng, double scale) {
  const std::size_t vocab = dim + 1;
  const std::size_t classes = std::max<std::size_t>(dim - 1, 2);
  auto base = std::make_shared<EmbeddingParams>();
  base->label_embed = random_matrix(dim, vocab, rng, scale);
  base->feature_embed = random_matrix(dim, dim, rng, scale);
  base->scene_embed = DenseMatrix(dim, 1);
  base->mode = mode;
  auto head = std::make_shared<ClassifierParams>(
      ClassifierParams{random_matrix(classes, dim, rng, scale), random_vector(classes, rng, scale)});
  std::uniform_int_distribution<std::size_t> pick_label(0, vocab - 1);
  std::uniform_int_distribution<std::size_t> pick_class(0, classes - 1);
  const Label label = pick_label(rng);
  const std::size_t target = pick_class(rng);
  const Vector feature = random_vector(dim, rng, 1.0);

  auto unpack = [base, head, feature](std::span<const double> flat) {
    auto p = std::make_shared<std::tuple<EmbeddingParams, ClassifierParams, Vector>>(*base, *head, feature);
    auto& [emb, cls, feat] = *p;
    scatter(flat, {emb.label_embed.values(), emb.feature_embed.values(), cls.weights.values(),
                   std::span<double>(cls.bias), std::span<double>(feat)});
    return p;
  };
  Problem prob;
  prob.point = gather({base->label_embed.values(), base->feature_embed.values(),
                       head->weights.values(), head->bias, feature});
  prob.loss = [=](std::span<const double> flat) {
    auto p = unpack(flat);
    auto& [emb, cls, feat] = *p;
    return nll(classify(cls, joint_embed(emb, label, feat)), target);
  };
  prob.gradient = [=](std::span<const double> flat) {
    auto p = unpack(flat);
    auto& [emb, cls, feat] = *p;
    EmbedCache cache;
    const Vector x = joint_embed(emb, label, feat, &cache);
    const Distribution d = classify(cls, x);
    EmbeddingParams g{DenseMatrix(emb.label_embed.rows(), emb.label_embed.cols()),
                      DenseMatrix(emb.feature_embed.rows(), emb.feature_embed.cols()),
                      DenseMatrix(dim, 1), mode};
    ClassifierParams gc{DenseMatrix(cls.weights.rows(), cls.weights.cols()), Vector(cls.bias.size())};
    const Vector dx = classify_nll_backward(cls, x, d, target, 1.0, gc);
    const EmbedGrads ge = joint_embed_backward(emb, cache, dx, g);
    return gather({g.label_embed.values(), g.feature_embed.values(), gc.weights.values(), gc.bias,
                   ge.feature});
  };
  return prob;
}

Problem scene_problem(std::size_t dim, Rng& rng, double scale) {
  const std::size_t classes = std::max<std::size_t>(dim - 1, 2);
  EmbeddingParams base;
  base.label_embed = DenseMatrix(dim, 2);
  base.feature_embed = DenseMatrix(dim, 1);
  base.scene_embed = random_matrix(dim, dim + 1, rng, scale);
  const ClassifierParams head{random_matrix(classes, dim, rng, scale), random_vector(classes, rng, scale)};
  const Vector scene = random_vector(dim + 1, rng, 1.0);
  std::uniform_int_distribution<std::size_t> pick_class(0, classes - 1);
  const std::size_t target = pick_class(rng);

  Problem prob;
  prob.point = gather({base.scene_embed.values()});
  prob.loss = [=](std::span<const double> flat) {
    EmbeddingParams emb = base;
    scatter(flat, {emb.scene_embed.values()});
    return nll(classify(head, scene_embed(emb, scene)), target);
  };
  prob.gradient = [=](std::span<const double> flat) {
    EmbeddingParams emb = base;
    scatter(flat, {emb.scene_embed.values()});
    SceneCache cache;
    const Vector x = scene_embed(emb, scene, &cache);
    const Distribution d = classify(head, x);
    ClassifierParams gc{DenseMatrix(head.weights.rows(), head.weights.cols()), Vector(head.bias.size())};
    const Vector dx = classify_nll_backward(head, x, d, target, 1.0, gc);
    EmbeddingParams g{DenseMatrix(dim, 2), DenseMatrix(dim, 1), DenseMatrix(dim, dim + 1), emb.mode};
    scene_embed_backward(cache, dx, g);
    return gather({g.scene_embed.values()});
  };
  return prob;
}

// Loss = sum_t <r_t, z_t> over a `steps`-long unroll; checks weights and inputs.
Problem lstm_problem(std::size_t dim, std::size_t steps, Rng& rng, double scale) {
  const std::size_t in = dim;
  LstmParams base{random_matrix(4 * dim, in, rng, scale), random_matrix(4 * dim, dim, rng, scale),
                  random_vector(4 * dim, rng, scale)};
  Vector inputs = random_vector(steps * in, rng, 1.0);
  std::vector<Vector> projections;
  for (std::size_t t = 0; t < steps; ++t) projections.push_back(random_vector(dim, rng, 1.0));

  auto unpack = [=](std::span<const double> flat, LstmParams& p, Vector& xs) {
    p = base;
    xs = inputs;
    scatter(flat, {p.input_weights.values(), p.hidden_weights.values(), std::span<double>(p.bias),
                   std::span<double>(xs)});
  };
  Problem prob;
  prob.point = gather({base.input_weights.values(), base.hidden_weights.values(), base.bias, inputs});
  prob.loss = [=](std::span<const double> flat) {
    LstmParams p;
    Vector xs;
    unpack(flat, p, xs);
    LstmState s = LstmState::zeros(dim);
    double loss = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      LstmStep step = lstm_step(p, s, std::span<const double>(xs).subspan(t * in, in));
      loss += dot(projections[t], step.output);
      s = std::move(step.state);
    }
    return loss;
  };
  prob.gradient = [=](std::span<const double> flat) {
    LstmParams p;
    Vector xs;
    unpack(flat, p, xs);
    std::vector<LstmCache> caches(steps);
    LstmState s = LstmState::zeros(dim);
    for (std::size_t t = 0; t < steps; ++t) {
      s = lstm_step(p, s, std::span<const double>(xs).subspan(t * in, in), &caches[t]).state;
    }
    LstmParams g{DenseMatrix(4 * dim, in), DenseMatrix(4 * dim, dim), Vector(4 * dim, 0.0)};
    const std::vector<Vector> dx = lstm_backward(p, caches, projections, g);
    Vector out = gather({g.input_weights.values(), g.hidden_weights.values(), g.bias});
    for (const Vector& d : dx) out.insert(out.end(), d.begin(), d.end());
    return out;
  };
  return prob;
}

Problem classifier_problem(std::size_t dim, Rng& rng, double scale) {
  const std::size_t classes = std::max<std::size_t>(dim - 1, 2);
  const ClassifierParams base{random_matrix(classes, dim, rng, scale), random_vector(classes, rng, scale)};
  const Vector z = random_vector(dim, rng, 1.0);
  std::uniform_int_distribution<std::size_t> pick_class(0, classes - 1);
  const std::size_t target = pick_class(rng);
  auto unpack = [=](std::span<const double> flat, ClassifierParams& p, Vector& zz) {
    p = base;
    zz = z;
    scatter(flat, {p.weights.values(), std::span<double>(p.bias), std::span<double>(zz)});
  };
  Problem prob;
  prob.point = gather({base.weights.values(), base.bias, z});
  prob.loss = [=](std::span<const double> flat) {
    ClassifierParams p;
    Vector zz;
    unpack(flat, p, zz);
    return nll(classify(p, zz), target);
  };
  prob.gradient = [=](std::span<const double> flat) {
    ClassifierParams p;
    Vector zz;
    unpack(flat, p, zz);
    const Distribution d = classify(p, zz);
    ClassifierParams g{DenseMatrix(classes, dim), Vector(classes, 0.0)};
    const Vector dz = classify_nll_backward(p, zz, d, target, 1.0, g);
    return gather({g.weights.values(), g.bias, dz});
  };
  return prob;
}

Problem model_problem(std::size_t dim, EmbedMode mode, bool use_scene, std::size_t n, Rng& rng,
                      std::uint64_t seed, double scale, bool zero_init) {
  ModelConfig mc;
  mc.num_identities = std::max<std::size_t>(dim - 1, 3);
  mc.feature_dim = dim;
  mc.scene_dim = dim;
  mc.embed_dim = dim;
  mc.hidden_dim = dim;
  mc.mode = mode;
  mc.use_scene = use_scene;
  ModelParams base = zero_init ? ModelParams::zeros(mc) : ModelParams::initialize(mc, seed, scale);
  SequenceItem item;
  item.scene = random_vector(dim, rng, 1.0);
  std::uniform_int_distribution<Label> pick_label(1, mc.num_identities);
  for (std::size_t t = 0; t < n; ++t) {
    item.features.push_back(random_vector(dim, rng, 1.0));
    item.labels.push_back(pick_label(rng));
  }
  item.pad_to = 22;

  Problem prob;
  prob.point = base.flatten();
  prob.loss = [=](std::span<const double> flat) {
    ModelParams p = base;
    p.assign(flat);
    return forward_train(p, item).loss;
  };
  prob.gradient = [=](std::span<const double> flat) {
    ModelParams p = base;
    p.assign(flat);
    return backward_train(p, forward_train(p, item)).flatten();
  };
  return prob;
}

GradcheckEntry check(const std::string& name, const Problem& prob, const GradcheckOptions& opt) {
  Vector analytic = prob.gradient(prob.point);
  if (name == opt.corrupt && !analytic.empty()) analytic[0] += 1e-2;
  const Vector numeric = finite_diff_grad(prob.loss, prob.point, opt.eps);
  GradcheckEntry e;
  e.name = name;
  e.coordinates = analytic.size();
  e.max_rel_error = max_relative_error(analytic, numeric);
  e.passed = e.max_rel_error <= opt.tolerance;
  return e;
}

}  // namespace

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> names = {"joint_embed/addition", "joint_embed/max", "scene_embed",
                                    "lstm/1", "lstm/2", "lstm/3", "lstm/4", "classifier"};
  for (const char* mode : {"addition", "max"}) {
    for (const char* scene : {"scene", "noscene"}) {
      for (int n = 1; n <= 3; ++n) {
        names.push_back(std::string("model/") + mode + "/" + scene + "/n" + std::to_string(n));
      }
    }
  }
  return names;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  if (opt.dim < 2 || opt.dim > 16) throw ConfigError("gradcheck: dim must lie in [2, 16]");
  if (opt.seeds.empty()) throw ConfigError("gradcheck: no seeds");
  const std::vector<std::string> names = gradcheck_names();
  if (!opt.corrupt.empty() && std::find(names.begin(), names.end(), opt.corrupt) == names.end()) {
    throw ConfigError("gradcheck: unknown check '" + opt.corrupt + "'");
  }
  GradcheckReport report;
  for (const std::string& name : names) report.entries.push_back(GradcheckEntry{name, 0.0, 0, true});

  const double scale = opt.zero_init ? 0.0 : 0.5;
  for (std::uint64_t seed : opt.seeds) {
    Rng rng = make_rng(seed, "gradcheck");
    std::vector<Problem> problems;
    problems.push_back(embed_problem(opt.dim, EmbedMode::Addition, rng, scale));
    problems.push_back(embed_problem(opt.dim, EmbedMode::ElementwiseMax, rng, scale));
    problems.push_back(scene_problem(opt.dim, rng, scale));
    for (std::size_t steps = 1; steps <= 4; ++steps) {
      problems.push_back(lstm_problem(opt.dim, steps, rng, scale));
    }
    problems.push_back(classifier_problem(opt.dim, rng, scale));
    for (EmbedMode mode : {EmbedMode::Addition, EmbedMode::ElementwiseMax}) {
      for (bool scene : {true, false}) {
        for (std::size_t n = 1; n <= 3; ++n) {
          problems.push_back(model_problem(opt.dim, mode, scene, n, rng,
                                           derive_seed(seed, "gradcheck-model", n), scale,
                                           opt.zero_init));
        }
      }
    }
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const GradcheckEntry e = check(names[i], problems[i], opt);
      GradcheckEntry& agg = report.entries[i];
      agg.coordinates = e.coordinates;
      agg.max_rel_error = std::max(agg.max_rel_error, e.max_rel_error);
      agg.passed = agg.passed && e.passed;
    }
  }
  for (const GradcheckEntry& e : report.entries) report.passed = report.passed && e.passed;
  return report;
}

}  // namespace seqrec
