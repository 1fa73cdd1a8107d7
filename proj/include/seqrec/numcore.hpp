#pragma once

// Dense double-precision kernels shared by every layer: matrix-vector
// products, rectifiers, softmax / negative log-likelihood, Adam, and the
// central-difference gradient oracle.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace seqrec {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, Vector values);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector values_;
};

/// A probability vector: entries in [0,1] summing to one.
class Distribution {
 public:
  Distribution() = default;
  /// Validates the probability invariants; throws ValidationError otherwise.
  explicit Distribution(Vector probs);

  std::size_t dim() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  /// Index of the largest entry; ties go to the lowest index.
  std::size_t argmax() const;

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  struct Unchecked {};
  Distribution(Vector probs, Unchecked) : probs_(std::move(probs)) {}
  friend Distribution softmax(std::span<const double> logits);

  Vector probs_;
};

// result = m * v
Vector matvec(const DenseMatrix& m, std::span<const double> v);
// out += m * v
void matvec_accumulate(const DenseMatrix& m, std::span<const double> v, std::span<double> out);
// result = m^T * v
Vector matvec_transposed(const DenseMatrix& m, std::span<const double> v);
// out += m^T * v
void matvec_transposed_accumulate(const DenseMatrix& m, std::span<const double> v,
                                  std::span<double> out);
// m += a * b^T
void add_outer(DenseMatrix& m, std::span<const double> a, std::span<const double> b);

Vector relu(std::span<const double> v);
double sigmoid(double x);

Distribution softmax(std::span<const double> logits);

/// Negative log-probability of `target_index`, with probabilities floored at kProbFloor.
double nll(const Distribution& dist, std::size_t target_index);
inline constexpr double kProbFloor = 1e-12;

/// Index of the largest entry; lowest index on ties.
std::size_t argmax(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
bool all_finite(std::span<const double> v);

Vector one_hot(std::size_t index, std::size_t dim);

struct AdamState {
  std::size_t step = 0;
  Vector first_moment;
  Vector second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  /// Zero moments for `n` parameters.
  static AdamState for_size(std::size_t n, double learning_rate);
};

/// One bias-corrected Adam update applied in place. Coordinates whose gradient is
/// exactly zero only have their moments decayed; their parameters do not move.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every coordinate.
/// Throws NumericError if f returns a non-finite value.
Vector finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double eps);

/// |a - b| / max(1, |a|): the error measure every gradient check uses.
double relative_error(double analytic, double numeric);
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

}  // namespace seqrec
