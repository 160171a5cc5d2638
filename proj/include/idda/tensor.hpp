// Copyright 2026 The idda-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IDDA_TENSOR_HPP
#define IDDA_TENSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace idda {

// Dense row-major tensor of doubles. All model math runs in 64-bit floating
// point so gradient checks against central differences are meaningful.
// Rank is 1 or 2 in practice (vectors, matrices, index-flattened batches).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape);
  Tensor(std::vector<std::int64_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::int64_t> shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  // Matrix accessors (rank-2 only; unchecked in release paths).
  std::int64_t rows() const { return shape_[0]; }
  std::int64_t cols() const { return shape_.size() > 1 ? shape_[1] : 1; }
  double& at(std::int64_t r, std::int64_t c) { return data_[r * cols() + c]; }
  double at(std::int64_t r, std::int64_t c) const { return data_[r * cols() + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[i]; }
  double operator[](std::int64_t i) const { return data_[i]; }

  double item() const;  // scalar tensors only

  void fill(double value);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_string() const;

 private:
  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

// out = a @ b for rank-2 tensors, [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// out += a @ b; shapes must already agree.
void matmul_accum(const Tensor& a, const Tensor& b, Tensor& out);

// out = a^T @ b, [k,m]^T is not materialized.
Tensor matmul_transpose_a(const Tensor& a, const Tensor& b);

// out = a @ b^T.
Tensor matmul_transpose_b(const Tensor& a, const Tensor& b);

double dot(const Tensor& a, const Tensor& b);

void axpy(double alpha, const Tensor& x, Tensor& y);  // y += alpha * x

}  // namespace idda

#endif  // IDDA_TENSOR_HPP
