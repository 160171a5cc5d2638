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

#ifndef IDDA_AUTOGRAD_HPP_
#define IDDA_AUTOGRAD_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "idda/tensor.hpp"

namespace idda {

// Handle to a node on a Tape.
struct Value {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Describes how sentences of a padded batch are laid out in a flattened
// [batch * stride, width] activation matrix: sentence b owns rows
// [b * stride, b * stride + lens[b]); the remaining rows are padding.
struct SeqLayout {
  std::int64_t batch = 0;
  std::int64_t stride = 0;
  std::vector<std::int64_t> lens;
};

// Reverse-mode automatic differentiation over a linear tape of Tensor ops.
//
// Usage: create leaves/constants, apply ops, call backward() once on a scalar
// root, then read gradients of leaves via grad(). The tape is single-use.
// Tensors passed by reference (leaf, constant_ref) must outlive the tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Inputs. A leaf participates in gradient computation; constants do not.
  Value leaf(const Tensor& t);
  Value constant_ref(const Tensor& t);
  Value constant(Tensor t);

  // Ops.
  Value matmul(Value a, Value b);
  Value add(Value a, Value b);
  // out[r, c] = a[r, c] + bias[c]
  Value add_row_broadcast(Value a, Value bias);
  Value relu(Value a);
  Value scale(Value a, double s);
  // Row-wise layer normalization with learned gain/shift vectors.
  Value layer_norm(Value x, Value gain, Value shift, double eps = 1e-6);
  // out[i, :] = table[row_ids[i], :]
  Value gather_rows(Value table, std::vector<std::int64_t> row_ids);
  // Fused scaled-dot-product multihead attention over flattened padded
  // batches. q is [B * Sq, d]; k and v are [B * Skv, d]. Rows beyond a
  // sentence's length are ignored as keys and produce zero outputs as
  // queries. With causal = true, query i attends to keys j <= i.
  Value attention(Value q, Value k, Value v, const SeqLayout& q_layout,
                  const SeqLayout& kv_layout, int num_heads, bool causal);
  Value log_softmax_rows(Value x);
  // Weighted mean negative log likelihood of picked labels:
  //   sum_r weights[r] * (-logprobs[r, labels[r]]) / sum_r weights[r]
  Value nll_pick(Value logprobs, std::vector<std::int64_t> labels,
                 std::vector<double> weights);
  // Weighted mean of row-wise KL(exp(logprobs) || exp(ref_logprobs)); the
  // reference distribution is a constant (no gradient flows into it).
  Value kl_rows(Value logprobs, const Tensor& ref_logprobs,
                std::vector<double> weights);
  // Scalar combination ca * a + cb * b.
  Value affine2(Value a, Value b, double ca, double cb);

  // Accessors.
  const Tensor& data(Value v) const;
  // Gradient of the last backward() root w.r.t. v (zeros if v is unused).
  const Tensor& grad(Value v);
  bool needs_grad(Value v) const;

  // Accumulates gradients of the scalar root into every participating node.
  void backward(Value root);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    bool grad_alloc = false;
    bool needs_grad = false;
    std::function<void(Tape&)> backward_fn;
  };

  const Tensor& node_data(std::int32_t id) const {
    const Node& n = nodes_[id];
    return n.external != nullptr ? *n.external : n.owned;
  }
  Value push(Tensor data, bool needs_grad, std::function<void(Tape&)> backward_fn);
  void check(Value v) const;
  Tensor& grad_buffer(std::int32_t id);

  std::vector<Node> nodes_;
};

}  // namespace idda

#endif  // IDDA_AUTOGRAD_HPP_
