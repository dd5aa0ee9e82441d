#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace framerepeat::numerics {

// Row-major array of doubles. Rank 1 arrays behave as a single row where a
// row/column view is needed.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> shape, double fill = 0.0);
  DenseArray(std::vector<std::size_t> shape, std::vector<double> data);

  static DenseArray vector(std::vector<double> values);
  static DenseArray matrix(std::size_t rows, std::size_t cols,
                           std::initializer_list<double> values);
  static DenseArray zeros(std::size_t rows, std::size_t cols);
  static DenseArray identity(std::size_t n);
  static DenseArray zeros_like(const DenseArray& other);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  bool same_shape(const DenseArray& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;

  // Bit-level equality of shape and values.
  friend bool operator==(const DenseArray& a, const DenseArray& b);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

DenseArray matmul(const DenseArray& a, const DenseArray& b);
DenseArray transpose(const DenseArray& a);

// Row-wise softmax with per-row max subtraction.
DenseArray softmax_rows(const DenseArray& a);

// gain * (x - mean) / sqrt(var + eps) + bias, population variance.
DenseArray layer_norm(const DenseArray& x, const DenseArray& gain, const DenseArray& bias,
                      double eps = 1e-5);
DenseArray layer_norm_rows(const DenseArray& x, const DenseArray& gain, const DenseArray& bias,
                           double eps = 1e-5);

double mean(std::span<const double> x);
// Population standard deviation.
double stddev(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

using ScalarFunction = std::function<double(const std::vector<DenseArray>&)>;

// Central differences, one coordinate at a time. Independent of the tape.
std::vector<DenseArray> finite_diff_grad(const ScalarFunction& f, std::vector<DenseArray> params,
                                         double step = 1e-5);

double max_relative_error(const DenseArray& analytic, const DenseArray& numeric,
                          double floor = 1e-8);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<DenseArray> first_moment;
  std::vector<DenseArray> second_moment;
  std::int64_t step = 0;

  static AdamState zeros_like(std::span<const DenseArray> params);
};

void adam_step(std::span<DenseArray> params, std::span<const DenseArray> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace framerepeat::numerics
