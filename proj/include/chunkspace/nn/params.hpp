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

#ifndef CHUNKSPACE_NN_PARAMS_HPP_
#define CHUNKSPACE_NN_PARAMS_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "chunkspace/core/tensor.hpp"

namespace chunkspace {

/// One named trainable tensor plus its gradient and Adam moments.
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;  // first moment
  Tensor<T> v;  // second moment
  int64_t step = 0;
};

/// Named parameters with stable (insertion) iteration order.  All passes
/// read values through this container; backward passes accumulate into
/// `grad`, and AdamStep consumes the gradients.
template <typename T>
class ParameterSet {
 public:
  Param<T>& Create(const std::string& name, std::vector<int64_t> shape) {
    if (index_.count(name) != 0) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    index_[name] = names_.size();
    names_.push_back(name);
    params_.emplace_back();
    Param<T>& p = params_.back();
    p.value = Tensor<T>::Zeros(shape);
    p.grad = Tensor<T>::Zeros(shape);
    p.m = Tensor<T>::Zeros(shape);
    p.v = Tensor<T>::Zeros(shape);
    return p;
  }

  bool Has(const std::string& name) const { return index_.count(name) != 0; }

  Param<T>& Get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw std::out_of_range("unknown parameter: " + name);
    }
    return params_[it->second];
  }

  const Param<T>& Get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw std::out_of_range("unknown parameter: " + name);
    }
    return params_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }
  size_t size() const { return params_.size(); }
  Param<T>& at(size_t i) { return params_[i]; }
  const Param<T>& at(size_t i) const { return params_[i]; }

  int64_t TotalParameters() const {
    int64_t total = 0;
    for (const auto& p : params_) total += p.value.numel();
    return total;
  }

  void ZeroGrads() {
    for (auto& p : params_) p.grad.Fill(T(0));
  }

  /// Bias-corrected Adam update over every parameter.  Throws (naming the
  /// parameter) when any gradient entry is non-finite.
  void AdamStep(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8) {
    for (size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = params_[i];
      for (const T& g : p.grad.raw()) {
        if (!std::isfinite(static_cast<double>(g))) {
          throw std::runtime_error("non-finite gradient in parameter '" +
                                   names_[i] + "'");
        }
      }
      p.step += 1;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(p.step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(p.step));
      for (int64_t k = 0; k < p.value.numel(); ++k) {
        const double g = static_cast<double>(p.grad[k]);
        const double m = beta1 * static_cast<double>(p.m[k]) +
                         (1.0 - beta1) * g;
        const double v = beta2 * static_cast<double>(p.v[k]) +
                         (1.0 - beta2) * g * g;
        p.m[k] = static_cast<T>(m);
        p.v[k] = static_cast<T>(v);
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        p.value[k] = static_cast<T>(static_cast<double>(p.value[k]) -
                                    lr * m_hat / (std::sqrt(v_hat) + eps));
      }
    }
  }

  /// Copies values (not optimizer state) from another set; shapes and the
  /// name order must match exactly.
  template <typename U>
  void CopyValuesFrom(const ParameterSet<U>& other) {
    if (other.names() != names_) {
      throw std::invalid_argument("parameter sets are not congruent");
    }
    for (size_t i = 0; i < params_.size(); ++i) {
      const auto& src = other.at(i).value;
      if (src.shape() != params_[i].value.shape()) {
        throw std::invalid_argument("parameter shape mismatch: " + names_[i]);
      }
      for (int64_t k = 0; k < src.numel(); ++k) {
        params_[i].value[k] = static_cast<T>(src[k]);
      }
    }
  }

 private:
  std::vector<std::string> names_;
  std::vector<Param<T>> params_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace chunkspace

#endif  // CHUNKSPACE_NN_PARAMS_HPP_
