#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "coreset/error.hpp"

namespace coreset {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

/// Dense row-major n-d array of 32-bit floats.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0f) { check_shape(); }
  Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    require(data_.size() == shape_size(shape_), ErrorKind::Shape,
            "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  /// Element of a 3-d (C,H,W) tensor.
  float at(std::size_t c, std::size_t y, std::size_t x) const { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
  float& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  bool operator==(const Tensor&) const = default;

 private:
  void check_shape() const {
    for (auto d : shape_) require(d > 0, ErrorKind::Shape, "tensor dimensions must be positive: " + shape_string(shape_));
  }

  Shape shape_;
  std::vector<float> data_;
};

/// Row-major 2-d matrix. `Matrix` (float) is the storage type; the solvers use `MatrixD`.
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, ErrorKind::Shape,
            "matrix data length " + std::to_string(data_.size()) + " does not match " + std::to_string(rows_) + "x" +
                std::to_string(cols_));
  }
  BasicMatrix(std::initializer_list<std::initializer_list<T>> rows) : rows_(rows.size()) {
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      require(r.size() == cols_, ErrorKind::Shape, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  template <typename U>
  static BasicMatrix cast(const BasicMatrix<U>& other) {
    std::vector<T> data(other.values().begin(), other.values().end());
    return BasicMatrix(other.rows(), other.cols(), std::move(data));
  }

  static BasicMatrix identity(std::size_t n) {
    BasicMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  BasicMatrix transposed() const {
    BasicMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  bool operator==(const BasicMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;
using MatrixD = BasicMatrix<double>;

template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  require(a.cols() == b.rows(), ErrorKind::Shape,
          "matmul shape mismatch: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
              std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  BasicMatrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      if (aik == T{}) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

/// a^T b without materializing the transpose.
template <typename T>
BasicMatrix<T> matmul_tn(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  require(a.rows() == b.rows(), ErrorKind::Shape, "matmul_tn shape mismatch");
  BasicMatrix<T> out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T aki = arow[i];
      if (aki == T{}) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

template <typename T>
double frobenius_norm_squared(const BasicMatrix<T>& m) {
  double s = 0.0;
  for (T v : m.data()) s += static_cast<double>(v) * static_cast<double>(v);
  return s;
}

template <typename T>
double frobenius_norm(const BasicMatrix<T>& m) {
  require(!m.empty(), ErrorKind::Shape, "frobenius_norm of empty matrix");
  return std::sqrt(frobenius_norm_squared(m));
}

template <typename T>
double frobenius_distance_squared(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Shape, "frobenius distance shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    s += d * d;
  }
  return s;
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

// Lowers a (C,H,W) input to the patch matrix used by convolution. Rows are ordered
// channel-major then kernel row then kernel column, with a trailing all-ones row that
// picks up the bias column of the weight matrix.
inline Matrix im2col(const Tensor& input, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
  require(input.rank() == 3, ErrorKind::Shape, "im2col expects a (C,H,W) tensor, got " + shape_string(input.shape()));
  require(kh > 0 && kw > 0 && stride > 0, ErrorKind::Shape, "im2col kernel and stride must be positive");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  require(H + 2 * pad >= kh && W + 2 * pad >= kw, ErrorKind::Shape,
          "im2col: kernel larger than padded input " + shape_string(input.shape()));
  const std::size_t out_h = (H + 2 * pad - kh) / stride + 1;
  const std::size_t out_w = (W + 2 * pad - kw) / stride + 1;

  Matrix cols(C * kh * kw + 1, out_h * out_w);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        auto dst = cols.row((c * kh + i) * kw + j);
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const long y = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const long x = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            if (y >= 0 && x >= 0 && y < static_cast<long>(H) && x < static_cast<long>(W))
              dst[oy * out_w + ox] = input.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          }
        }
      }
  std::fill(cols.row(cols.rows() - 1).begin(), cols.row(cols.rows() - 1).end(), 1.0f);
  return cols;
}

namespace detail {

template <typename Reduce>
Tensor pool2d(const Tensor& input, std::size_t window, std::size_t stride, Reduce reduce, const char* name) {
  require(!input.empty(), ErrorKind::Shape, std::string(name) + " of empty input");
  require(input.rank() == 3, ErrorKind::Shape, std::string(name) + " expects (C,H,W), got " + shape_string(input.shape()));
  require(window > 0 && stride > 0, ErrorKind::Shape, std::string(name) + " window and stride must be positive");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  require(H >= window && W >= window, ErrorKind::Shape,
          std::string(name) + ": window larger than input " + shape_string(input.shape()));
  const std::size_t out_h = (H - window) / stride + 1;
  const std::size_t out_w = (W - window) / stride + 1;
  Tensor out({C, out_h, out_w});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox) out.at(c, oy, ox) = reduce(input, c, oy * stride, ox * stride, window);
  return out;
}

}  // namespace detail

inline Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  return detail::pool2d(
      input, window, stride,
      [](const Tensor& t, std::size_t c, std::size_t y0, std::size_t x0, std::size_t win) {
        float best = t.at(c, y0, x0);
        for (std::size_t y = y0; y < y0 + win; ++y)
          for (std::size_t x = x0; x < x0 + win; ++x) best = std::max(best, t.at(c, y, x));
        return best;
      },
      "maxpool2d");
}

inline Tensor avgpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  return detail::pool2d(
      input, window, stride,
      [](const Tensor& t, std::size_t c, std::size_t y0, std::size_t x0, std::size_t win) {
        double s = 0.0;
        for (std::size_t y = y0; y < y0 + win; ++y)
          for (std::size_t x = x0; x < x0 + win; ++x) s += t.at(c, y, x);
        return static_cast<float>(s / static_cast<double>(win * win));
      },
      "avgpool2d");
}

inline Tensor relu(Tensor t) {
  for (float& v : t.data()) v = std::max(v, 0.0f);
  return t;
}

inline std::vector<float> softmax(std::span<const float> logits) {
  require(!logits.empty(), ErrorKind::Shape, "softmax of empty input");
  const float peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> e(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(static_cast<double>(logits[i]) - static_cast<double>(peak));
    total += e[i];
  }
  std::vector<float> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(e[i] / total);
  return out;
}

/// Index of the first maximal element.
inline std::size_t argmax(std::span<const float> v) {
  require(!v.empty(), ErrorKind::Shape, "argmax of empty input");
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

}  // namespace coreset
