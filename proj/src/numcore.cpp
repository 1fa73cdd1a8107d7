#include "seqrec/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqrec/errors.hpp"

namespace seqrec {

namespace {

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected dimension " + std::to_string(want) +
                     ", got " + std::to_string(got));
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, Vector values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  require_dim(values_.size(), rows * cols, "DenseMatrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool DenseMatrix::all_finite() const { return seqrec::all_finite(values_); }

Distribution::Distribution(Vector probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ValidationError("Distribution: empty probability vector");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("Distribution: entry outside [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("Distribution: entries sum to " + std::to_string(total));
  }
}

std::size_t Distribution::argmax() const { return seqrec::argmax(probs_); }

Vector matvec(const DenseMatrix& m, std::span<const double> v) {
  Vector out(m.rows(), 0.0);
  matvec_accumulate(m, v, out);
  return out;
}

void matvec_accumulate(const DenseMatrix& m, std::span<const double> v, std::span<double> out) {
  require_dim(v.size(), m.cols(), "matvec");
  require_dim(out.size(), m.rows(), "matvec output");
  const double* a = m.values().data();
  const std::size_t cols = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* row = a + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * v[j];
    out[i] += acc;
  }
}

Vector matvec_transposed(const DenseMatrix& m, std::span<const double> v) {
  Vector out(m.cols(), 0.0);
  matvec_transposed_accumulate(m, v, out);
  return out;
}

void matvec_transposed_accumulate(const DenseMatrix& m, std::span<const double> v,
                                  std::span<double> out) {
  require_dim(v.size(), m.rows(), "matvec_transposed");
  require_dim(out.size(), m.cols(), "matvec_transposed output");
  const double* a = m.values().data();
  const std::size_t cols = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* row = a + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += row[j] * vi;
  }
}

void add_outer(DenseMatrix& m, std::span<const double> a, std::span<const double> b) {
  require_dim(a.size(), m.rows(), "add_outer rows");
  require_dim(b.size(), m.cols(), "add_outer cols");
  double* data = m.values().data();
  const std::size_t cols = m.cols();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    double* row = data + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += ai * b[j];
  }
}

Vector relu(std::span<const double> v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Distribution softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax: empty logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - top);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return Distribution(std::move(probs), Distribution::Unchecked{});
}

double nll(const Distribution& dist, std::size_t target_index) {
  if (target_index >= dist.dim()) {
    throw IndexError("nll: target " + std::to_string(target_index) + " outside distribution of size " +
                     std::to_string(dist.dim()));
  }
  return -std::log(std::max(dist[target_index], kProbFloor));
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw ShapeError("argmax: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_dim(b.size(), a.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector one_hot(std::size_t index, std::size_t dim) {
  if (index >= dim) throw IndexError("one_hot: index out of range");
  Vector v(dim, 0.0);
  v[index] = 1.0;
  return v;
}

AdamState AdamState::for_size(std::size_t n, double learning_rate) {
  AdamState s;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  require_dim(grads.size(), params.size(), "adam_step grads");
  require_dim(state.first_moment.size(), params.size(), "adam_step first moment");
  require_dim(state.second_moment.size(), params.size(), "adam_step second moment");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    // A coordinate without gradient keeps its value; only its moments decay.
    if (g == 0.0) continue;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

Vector finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw NumericError("finite_diff_grad: eps must be positive");
  Vector point(x.begin(), x.end());
  Vector grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double up = f(point);
    point[i] = saved - eps;
    const double down = f(point);
    point[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  require_dim(numeric.size(), analytic.size(), "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, relative_error(analytic[i], numeric[i]));
  }
  return worst;
}

}  // namespace seqrec
