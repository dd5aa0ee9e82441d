#include "framerepeat/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "framerepeat/errors.hpp"

namespace framerepeat::numerics {

namespace {

std::size_t extent_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

void require_matrix(const DenseArray& a, const char* what) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(what) + ": expected a matrix, got shape " +
                         shape_string(a.shape()));
  }
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(extent_product(shape_), fill) {}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (extent_product(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match data length " +
                         std::to_string(data_.size()));
  }
}

DenseArray DenseArray::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return DenseArray({n}, std::move(values));
}

DenseArray DenseArray::matrix(std::size_t rows, std::size_t cols,
                              std::initializer_list<double> values) {
  return DenseArray({rows, cols}, std::vector<double>(values));
}

DenseArray DenseArray::zeros(std::size_t rows, std::size_t cols) {
  return DenseArray({rows, cols}, 0.0);
}

DenseArray DenseArray::identity(std::size_t n) {
  DenseArray out = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

DenseArray DenseArray::zeros_like(const DenseArray& other) { return DenseArray(other.shape(), 0.0); }

std::size_t DenseArray::rows() const noexcept {
  if (shape_.size() == 2) return shape_[0];
  return shape_.empty() ? 0 : 1;
}

std::size_t DenseArray::cols() const noexcept {
  if (shape_.size() == 2) return shape_[1];
  return shape_.empty() ? 0 : data_.size();
}

std::span<const double> DenseArray::row(std::size_t r) const {
  return std::span<const double>(data_).subspan(r * cols(), cols());
}

std::span<double> DenseArray::row(std::size_t r) {
  return std::span<double>(data_).subspan(r * cols(), cols());
}

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool operator==(const DenseArray& a, const DenseArray& b) {
  return a.shape_ == b.shape_ &&
         (a.data_.empty() ||
          std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(double)) == 0);
}

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents disagree " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  DenseArray out = DenseArray::zeros(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      const double* brow = b.data().data() + p * n;
      double* orow = out.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

DenseArray transpose(const DenseArray& a) {
  require_matrix(a, "transpose");
  DenseArray out = DenseArray::zeros(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

DenseArray softmax_rows(const DenseArray& a) {
  DenseArray out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  return out;
}

DenseArray layer_norm(const DenseArray& x, const DenseArray& gain, const DenseArray& bias,
                      double eps) {
  if (x.rank() != 1) throw DimensionError("layer_norm: expected a vector");
  return layer_norm_rows(x, gain, bias, eps);
}

DenseArray layer_norm_rows(const DenseArray& x, const DenseArray& gain, const DenseArray& bias,
                           double eps) {
  const std::size_t d = x.cols();
  if (d < 2) throw DegenerateInputError("layer_norm: need at least 2 features");
  if (gain.size() != d || bias.size() != d) throw DimensionError("layer_norm: gain/bias length");
  DenseArray out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = out.row(r);
    const double mu = mean(row);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) row[j] = gain[j] * (row[j] - mu) * inv + bias[j];
  }
  return out;
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double mu = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<DenseArray> finite_diff_grad(const ScalarFunction& f, std::vector<DenseArray> params,
                                         double step) {
  std::vector<DenseArray> grads;
  grads.reserve(params.size());
  for (auto& p : params) grads.push_back(DenseArray::zeros_like(p));
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double orig = params[t][i];
      params[t][i] = orig + step;
      const double up = f(params);
      params[t][i] = orig - step;
      const double down = f(params);
      params[t][i] = orig;
      grads[t][i] = (up - down) / (2.0 * step);
    }
  }
  return grads;
}

double max_relative_error(const DenseArray& analytic, const DenseArray& numeric, double floor) {
  if (!analytic.same_shape(numeric)) throw DimensionError("max_relative_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

AdamState AdamState::zeros_like(std::span<const DenseArray> params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.push_back(DenseArray::zeros_like(p));
    state.second_moment.push_back(DenseArray::zeros_like(p));
  }
  return state;
}

void adam_step(std::span<DenseArray> params, std::span<const DenseArray> grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw DimensionError("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (!params[t].same_shape(grads[t]) || !params[t].same_shape(state.first_moment[t]) ||
        !params[t].same_shape(state.second_moment[t])) {
      throw DimensionError("adam_step: shape mismatch in tensor " + std::to_string(t));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].data();
    auto g = grads[t].data();
    auto m = state.first_moment[t].data();
    auto v = state.second_moment[t].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace framerepeat::numerics
