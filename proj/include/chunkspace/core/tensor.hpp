// Copyright 2026 The Chunkspace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CHUNKSPACE_CORE_TENSOR_HPP_
#define CHUNKSPACE_CORE_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace chunkspace {

/// Dense row-major tensor.  Plain value type: copy/move do what you expect.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(Numel(shape_)), T(0));
  }

  Tensor(std::vector<int64_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != Numel(shape_)) {
      throw std::invalid_argument("tensor data length does not match shape");
    }
  }

  static Tensor Zeros(std::vector<int64_t> shape) {
    return Tensor(std::move(shape));
  }

  static Tensor Full(std::vector<int64_t> shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  // 2-D / 3-D accessors for the common cases.
  T& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  const T& at(int64_t i, int64_t j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  T& at(int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  const T& at(int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  T& at(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data_[static_cast<size_t>(
        ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  const T& at(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data_[static_cast<size_t>(
        ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  /// Pointer to row i of a 2-D tensor (or to sample i of a [B, ...] tensor).
  T* row(int64_t i) { return data_.data() + i * RowStride(); }
  const T* row(int64_t i) const { return data_.data() + i * RowStride(); }

  void Fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool AllFinite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string ShapeString() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) os << ", ";
      os << shape_[i];
    }
    os << "]";
    return os.str();
  }

  static int64_t Numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
      n *= d;
    }
    return n;
  }

 private:
  int64_t RowStride() const {
    int64_t s = 1;
    for (size_t i = 1; i < shape_.size(); ++i) s *= shape_[i];
    return s;
  }

  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

// y[i, j] += sum_k x[i, k] * w[j, k]   (w stored row-major as [out, in]).
// The j-inner loop keeps accumulation order per output fixed, so results do
// not depend on vector width.
template <typename T>
void MatmulTransposedAccum(const T* x, int64_t rows, int64_t in,
                           const T* w, int64_t out, T* y) {
  for (int64_t i = 0; i < rows; ++i) {
    const T* xi = x + i * in;
    T* yi = y + i * out;
    for (int64_t j = 0; j < out; ++j) {
      const T* wj = w + j * in;
      T acc = yi[j];
      for (int64_t k = 0; k < in; ++k) acc += xi[k] * wj[k];
      yi[j] = acc;
    }
  }
}

// y[i, j] += sum_k x[i, k] * w[k, j]   (w stored row-major as [in, out]).
template <typename T>
void MatmulAccum(const T* x, int64_t rows, int64_t in,
                 const T* w, int64_t out, T* y) {
  for (int64_t i = 0; i < rows; ++i) {
    const T* xi = x + i * in;
    T* yi = y + i * out;
    for (int64_t k = 0; k < in; ++k) {
      const T xv = xi[k];
      const T* wk = w + k * out;
      for (int64_t j = 0; j < out; ++j) yi[j] += xv * wk[j];
    }
  }
}

// w[j, k] += sum_i gy[i, j] * x[i, k]  — weight gradient for the transposed
// layout above.
template <typename T>
void OuterAccum(const T* gy, const T* x, int64_t rows, int64_t out, int64_t in,
                T* gw) {
  for (int64_t i = 0; i < rows; ++i) {
    const T* gyi = gy + i * out;
    const T* xi = x + i * in;
    for (int64_t j = 0; j < out; ++j) {
      const T g = gyi[j];
      if (g == T(0)) continue;
      T* gwj = gw + j * in;
      for (int64_t k = 0; k < in; ++k) gwj[k] += g * xi[k];
    }
  }
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_CORE_TENSOR_HPP_
