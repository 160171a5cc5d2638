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

#include "idda/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "idda/common.hpp"

namespace idda {

Value Tape::leaf(const Tensor& t) {
  nodes_.push_back(Node{});
  Node& n = nodes_.back();
  n.external = &t;
  n.needs_grad = true;
  return Value{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Value Tape::constant_ref(const Tensor& t) {
  nodes_.push_back(Node{});
  nodes_.back().external = &t;
  return Value{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Value Tape::constant(Tensor t) {
  nodes_.push_back(Node{});
  nodes_.back().owned = std::move(t);
  return Value{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Value Tape::push(Tensor data, bool needs_grad, std::function<void(Tape&)> backward_fn) {
  nodes_.push_back(Node{});
  Node& n = nodes_.back();
  n.owned = std::move(data);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward_fn = std::move(backward_fn);
  return Value{static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::check(Value v) const {
  if (!v.valid() || v.id >= static_cast<std::int32_t>(nodes_.size()))
    throw InputError("invalid tape value handle");
}

const Tensor& Tape::data(Value v) const {
  check(v);
  return node_data(v.id);
}

const Tensor& Tape::grad(Value v) {
  check(v);
  return grad_buffer(v.id);
}

bool Tape::needs_grad(Value v) const {
  check(v);
  return nodes_[v.id].needs_grad;
}

Tensor& Tape::grad_buffer(std::int32_t id) {
  Node& n = nodes_[id];
  if (!n.grad_alloc) {
    n.grad = Tensor(node_data(id).shape());
    n.grad_alloc = true;
  }
  return n.grad;
}

void Tape::backward(Value root) {
  check(root);
  if (data(root).size() != 1) throw ShapeError("backward root must be scalar");
  if (!nodes_[root.id].needs_grad) return;
  grad_buffer(root.id)[0] = 1.0;
  for (std::int32_t i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.grad_alloc && n.backward_fn) n.backward_fn(*this);
  }
}

// --------------------------------------------------------------------------
// Ops
// --------------------------------------------------------------------------

Value Tape::matmul(Value a, Value b) {
  check(a);
  check(b);
  Tensor out = idda::matmul(data(a), data(b));
  bool ng = needs_grad(a) || needs_grad(b);
  std::int32_t ia = a.id, ib = b.id;
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [ia, ib, iv](Tape& t) {
      const Tensor& d_out = t.grad_buffer(iv);
      if (t.nodes_[ia].needs_grad) {
        Tensor da = matmul_transpose_b(d_out, t.node_data(ib));
        axpy(1.0, da, t.grad_buffer(ia));
      }
      if (t.nodes_[ib].needs_grad) {
        Tensor db = matmul_transpose_a(t.node_data(ia), d_out);
        axpy(1.0, db, t.grad_buffer(ib));
      }
    };
  }
  return v;
}

Value Tape::add(Value a, Value b) {
  check(a);
  check(b);
  const Tensor& ta = data(a);
  const Tensor& tb = data(b);
  if (!ta.same_shape(tb))
    throw ShapeError("add shapes " + ta.shape_string() + " vs " + tb.shape_string());
  Tensor out = ta;
  axpy(1.0, tb, out);
  bool ng = needs_grad(a) || needs_grad(b);
  std::int32_t ia = a.id, ib = b.id;
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [ia, ib, iv](Tape& t) {
      const Tensor& d_out = t.grad_buffer(iv);
      if (t.nodes_[ia].needs_grad) axpy(1.0, d_out, t.grad_buffer(ia));
      if (t.nodes_[ib].needs_grad) axpy(1.0, d_out, t.grad_buffer(ib));
    };
  }
  return v;
}

Value Tape::add_row_broadcast(Value a, Value bias) {
  check(a);
  check(bias);
  const Tensor& ta = data(a);
  const Tensor& tb = data(bias);
  if (ta.rank() != 2 || tb.size() != ta.cols())
    throw ShapeError("add_row_broadcast shapes " + ta.shape_string() + " vs " + tb.shape_string());
  Tensor out = ta;
  const std::int64_t rows = ta.rows(), cols = ta.cols();
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) out.at(r, c) += tb[c];
  bool ng = needs_grad(a) || needs_grad(bias);
  std::int32_t ia = a.id, ib = bias.id;
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [ia, ib, iv, rows, cols](Tape& t) {
      const Tensor& d_out = t.grad_buffer(iv);
      if (t.nodes_[ia].needs_grad) axpy(1.0, d_out, t.grad_buffer(ia));
      if (t.nodes_[ib].needs_grad) {
        Tensor& db = t.grad_buffer(ib);
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t c = 0; c < cols; ++c) db[c] += d_out.at(r, c);
      }
    };
  }
  return v;
}

Value Tape::relu(Value a) {
  check(a);
  Tensor out = data(a);
  for (std::int64_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) out[i] = 0.0;
  bool ng = needs_grad(a);
  std::int32_t ia = a.id;
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [ia, iv](Tape& t) {
      const Tensor& d_out = t.grad_buffer(iv);
      const Tensor& x = t.node_data(ia);
      Tensor& da = t.grad_buffer(ia);
      for (std::int64_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0) da[i] += d_out[i];
    };
  }
  return v;
}

Value Tape::scale(Value a, double s) {
  check(a);
  Tensor out = data(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  bool ng = needs_grad(a);
  std::int32_t ia = a.id;
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [ia, iv, s](Tape& t) {
      axpy(s, t.grad_buffer(iv), t.grad_buffer(ia));
    };
  }
  return v;
}

Value Tape::layer_norm(Value x, Value gain, Value shift, double eps) {
  check(x);
  check(gain);
  check(shift);
  const Tensor& tx = data(x);
  const Tensor& tg = data(gain);
  const Tensor& tb = data(shift);
  const std::int64_t rows = tx.rows(), cols = tx.cols();
  if (tg.size() != cols || tb.size() != cols)
    throw ShapeError("layer_norm gain/shift must match row width");
  Tensor out({rows, cols});
  // Cache per-row mean and inverse stddev for backward.
  auto mean = std::make_shared<std::vector<double>>(rows);
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::int64_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) mu += tx.at(r, c);
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) {
      double d = tx.at(r, c) - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    double is = 1.0 / std::sqrt(var + eps);
    (*mean)[r] = mu;
    (*inv_std)[r] = is;
    for (std::int64_t c = 0; c < cols; ++c)
      out.at(r, c) = (tx.at(r, c) - mu) * is * tg[c] + tb[c];
  }
  bool ng = needs_grad(x) || needs_grad(gain) || needs_grad(shift);
  std::int32_t ix = x.id, ig = gain.id, ib = shift.id;
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [ix, ig, ib, iv, rows, cols, mean, inv_std](Tape& t) {
      const Tensor& d_out = t.grad_buffer(iv);
      const Tensor& tx = t.node_data(ix);
      const Tensor& tg = t.node_data(ig);
      const double n = static_cast<double>(cols);
      for (std::int64_t r = 0; r < rows; ++r) {
        const double mu = (*mean)[r];
        const double is = (*inv_std)[r];
        // xhat and dxhat for this row
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        std::vector<double> xhat(cols), dxhat(cols);
        for (std::int64_t c = 0; c < cols; ++c) {
          xhat[c] = (tx.at(r, c) - mu) * is;
          dxhat[c] = d_out.at(r, c) * tg[c];
          sum_dxhat += dxhat[c];
          sum_dxhat_xhat += dxhat[c] * xhat[c];
        }
        if (t.nodes_[ix].needs_grad) {
          Tensor& dx = t.grad_buffer(ix);
          for (std::int64_t c = 0; c < cols; ++c)
            dx.at(r, c) +=
                is / n * (n * dxhat[c] - sum_dxhat - xhat[c] * sum_dxhat_xhat);
        }
        if (t.nodes_[ig].needs_grad) {
          Tensor& dg = t.grad_buffer(ig);
          for (std::int64_t c = 0; c < cols; ++c) dg[c] += d_out.at(r, c) * xhat[c];
        }
        if (t.nodes_[ib].needs_grad) {
          Tensor& db = t.grad_buffer(ib);
          for (std::int64_t c = 0; c < cols; ++c) db[c] += d_out.at(r, c);
        }
      }
    };
  }
  return v;
}

Value Tape::gather_rows(Value table, std::vector<std::int64_t> row_ids) {
  check(table);
  const Tensor& tt = data(table);
  const std::int64_t cols = tt.cols();
  Tensor out({static_cast<std::int64_t>(row_ids.size()), cols});
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    std::int64_t r = row_ids[i];
    if (r < 0 || r >= tt.rows())
      throw InputError("gather_rows: index " + std::to_string(r) + " out of range [0," +
                       std::to_string(tt.rows()) + ")");
    for (std::int64_t c = 0; c < cols; ++c) out.at(static_cast<std::int64_t>(i), c) = tt.at(r, c);
  }
  bool ng = needs_grad(table);
  std::int32_t it = table.id;
  auto ids = std::make_shared<std::vector<std::int64_t>>(std::move(row_ids));
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [it, iv, ids, cols](Tape& t) {
      const Tensor& d_out = t.grad_buffer(iv);
      Tensor& dt = t.grad_buffer(it);
      for (std::size_t i = 0; i < ids->size(); ++i) {
        const std::int64_t r = (*ids)[i];
        for (std::int64_t c = 0; c < cols; ++c)
          dt.at(r, c) += d_out.at(static_cast<std::int64_t>(i), c);
      }
    };
  }
  return v;
}

Value Tape::attention(Value q, Value k, Value v, const SeqLayout& q_layout,
                      const SeqLayout& kv_layout, int num_heads, bool causal) {
  check(q);
  check(k);
  check(v);
  const Tensor& tq = data(q);
  const Tensor& tk = data(k);
  const Tensor& tv = data(v);
  const std::int64_t d = tq.cols();
  if (tk.cols() != d || tv.cols() != d) throw ShapeError("attention head width mismatch");
  if (num_heads <= 0 || d % num_heads != 0)
    throw ShapeError("attention: width not divisible by heads");
  if (q_layout.batch != kv_layout.batch) throw ShapeError("attention: batch mismatch");
  const std::int64_t dh = d / num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::int64_t batch = q_layout.batch;

  Tensor out({tq.rows(), d});
  // Softmax matrices kept for backward: one qlen x kvlen block per (sentence, head).
  auto attn_cache = std::make_shared<std::vector<std::vector<double>>>();
  attn_cache->resize(static_cast<std::size_t>(batch) * num_heads);

  for (std::int64_t b = 0; b < batch; ++b) {
    const std::int64_t q0 = b * q_layout.stride;
    const std::int64_t k0 = b * kv_layout.stride;
    const std::int64_t qlen = q_layout.lens[b];
    const std::int64_t kvlen = kv_layout.lens[b];
    for (int h = 0; h < num_heads; ++h) {
      const std::int64_t c0 = h * dh;
      std::vector<double>& A = (*attn_cache)[b * num_heads + h];
      A.assign(static_cast<std::size_t>(qlen) * kvlen, 0.0);
      for (std::int64_t i = 0; i < qlen; ++i) {
        const std::int64_t jmax = causal ? std::min<std::int64_t>(kvlen, i + 1) : kvlen;
        if (jmax <= 0) continue;
        double best = -1e300;
        std::vector<double> scores(jmax);
        for (std::int64_t j = 0; j < jmax; ++j) {
          double s = 0.0;
          for (std::int64_t c = 0; c < dh; ++c)
            s += tq.at(q0 + i, c0 + c) * tk.at(k0 + j, c0 + c);
          s *= inv_sqrt_dh;
          scores[j] = s;
          if (s > best) best = s;
        }
        double z = 0.0;
        for (std::int64_t j = 0; j < jmax; ++j) {
          scores[j] = std::exp(scores[j] - best);
          z += scores[j];
        }
        double* arow = A.data() + i * kvlen;
        for (std::int64_t j = 0; j < jmax; ++j) {
          const double a = scores[j] / z;
          arow[j] = a;
          for (std::int64_t c = 0; c < dh; ++c)
            out.at(q0 + i, c0 + c) += a * tv.at(k0 + j, c0 + c);
        }
      }
    }
  }

  bool ng = needs_grad(q) || needs_grad(k) || needs_grad(v);
  std::int32_t iq = q.id, ik = k.id, ivv = v.id;
  auto ql = std::make_shared<SeqLayout>(q_layout);
  auto kl = std::make_shared<SeqLayout>(kv_layout);
  Value out_v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t io = out_v.id;
    nodes_[io].backward_fn = [iq, ik, ivv, io, ql, kl, num_heads, causal, dh, inv_sqrt_dh,
                              attn_cache](Tape& t) {
      const Tensor& d_out = t.grad_buffer(io);
      const Tensor& tq = t.node_data(iq);
      const Tensor& tk = t.node_data(ik);
      const Tensor& tv = t.node_data(ivv);
      const bool gq = t.nodes_[iq].needs_grad;
      const bool gk = t.nodes_[ik].needs_grad;
      const bool gv = t.nodes_[ivv].needs_grad;
      Tensor* dq = gq ? &t.grad_buffer(iq) : nullptr;
      Tensor* dk = gk ? &t.grad_buffer(ik) : nullptr;
      Tensor* dv = gv ? &t.grad_buffer(ivv) : nullptr;
      for (std::int64_t b = 0; b < ql->batch; ++b) {
        const std::int64_t q0 = b * ql->stride;
        const std::int64_t k0 = b * kl->stride;
        const std::int64_t qlen = ql->lens[b];
        const std::int64_t kvlen = kl->lens[b];
        for (int h = 0; h < num_heads; ++h) {
          const std::int64_t c0 = h * dh;
          const std::vector<double>& A = (*attn_cache)[b * num_heads + h];
          for (std::int64_t i = 0; i < qlen; ++i) {
            const std::int64_t jmax = causal ? std::min<std::int64_t>(kvlen, i + 1) : kvlen;
            if (jmax <= 0) continue;
            const double* arow = A.data() + i * kvlen;
            // dA and the softmax Jacobian row correction.
            std::vector<double> dA(jmax, 0.0);
            double rowdot = 0.0;
            for (std::int64_t j = 0; j < jmax; ++j) {
              double s = 0.0;
              for (std::int64_t c = 0; c < dh; ++c)
                s += d_out.at(q0 + i, c0 + c) * tv.at(k0 + j, c0 + c);
              dA[j] = s;
              rowdot += s * arow[j];
              if (gv)
                for (std::int64_t c = 0; c < dh; ++c)
                  dv->at(k0 + j, c0 + c) += arow[j] * d_out.at(q0 + i, c0 + c);
            }
            for (std::int64_t j = 0; j < jmax; ++j) {
              const double d_score = arow[j] * (dA[j] - rowdot) * inv_sqrt_dh;
              if (d_score == 0.0) continue;
              if (gq)
                for (std::int64_t c = 0; c < dh; ++c)
                  dq->at(q0 + i, c0 + c) += d_score * tk.at(k0 + j, c0 + c);
              if (gk)
                for (std::int64_t c = 0; c < dh; ++c)
                  dk->at(k0 + j, c0 + c) += d_score * tq.at(q0 + i, c0 + c);
            }
          }
        }
      }
    };
  }
  return out_v;
}

Value Tape::log_softmax_rows(Value x) {
  check(x);
  const Tensor& tx = data(x);
  const std::int64_t rows = tx.rows(), cols = tx.cols();
  Tensor out({rows, cols});
  for (std::int64_t r = 0; r < rows; ++r) {
    double best = -1e300;
    for (std::int64_t c = 0; c < cols; ++c) best = std::max(best, tx.at(r, c));
    double z = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) z += std::exp(tx.at(r, c) - best);
    const double lz = best + std::log(z);
    for (std::int64_t c = 0; c < cols; ++c) out.at(r, c) = tx.at(r, c) - lz;
  }
  bool ng = needs_grad(x);
  std::int32_t ix = x.id;
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [ix, iv, rows, cols](Tape& t) {
      const Tensor& d_out = t.grad_buffer(iv);
      const Tensor& lp = t.node_data(iv);
      Tensor& dx = t.grad_buffer(ix);
      for (std::int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::int64_t c = 0; c < cols; ++c) s += d_out.at(r, c);
        for (std::int64_t c = 0; c < cols; ++c)
          dx.at(r, c) += d_out.at(r, c) - std::exp(lp.at(r, c)) * s;
      }
    };
  }
  return v;
}

Value Tape::nll_pick(Value logprobs, std::vector<std::int64_t> labels,
                     std::vector<double> weights) {
  check(logprobs);
  const Tensor& lp = data(logprobs);
  if (static_cast<std::int64_t>(labels.size()) != lp.rows() || labels.size() != weights.size())
    throw ShapeError("nll_pick: labels/weights must match row count");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (wsum <= 0.0) throw InputError("nll_pick: no weighted target tokens (all-pad batch)");
  double acc = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (weights[r] == 0.0) continue;
    const std::int64_t l = labels[r];
    if (l < 0 || l >= lp.cols()) throw InputError("nll_pick: label out of range");
    acc -= weights[r] * lp.at(static_cast<std::int64_t>(r), l);
  }
  Tensor out = Tensor::scalar(acc / wsum);
  bool ng = needs_grad(logprobs);
  std::int32_t il = logprobs.id;
  auto lab = std::make_shared<std::vector<std::int64_t>>(std::move(labels));
  auto wts = std::make_shared<std::vector<double>>(std::move(weights));
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [il, iv, lab, wts, wsum](Tape& t) {
      const double droot = t.grad_buffer(iv)[0];
      Tensor& dlp = t.grad_buffer(il);
      for (std::size_t r = 0; r < lab->size(); ++r) {
        if ((*wts)[r] == 0.0) continue;
        dlp.at(static_cast<std::int64_t>(r), (*lab)[r]) -= droot * (*wts)[r] / wsum;
      }
    };
  }
  return v;
}

Value Tape::kl_rows(Value logprobs, const Tensor& ref_logprobs, std::vector<double> weights) {
  check(logprobs);
  const Tensor& lp = data(logprobs);
  if (!lp.same_shape(ref_logprobs)) throw ShapeError("kl_rows: shape mismatch with reference");
  if (static_cast<std::int64_t>(weights.size()) != lp.rows())
    throw ShapeError("kl_rows: weights must match row count");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (wsum <= 0.0) throw InputError("kl_rows: no weighted target tokens (all-pad batch)");
  const std::int64_t rows = lp.rows(), cols = lp.cols();
  double acc = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (weights[r] == 0.0) continue;
    double kl = 0.0;
    for (std::int64_t c = 0; c < cols; ++c)
      kl += std::exp(lp.at(r, c)) * (lp.at(r, c) - ref_logprobs.at(r, c));
    acc += weights[r] * kl;
  }
  Tensor out = Tensor::scalar(acc / wsum);
  bool ng = needs_grad(logprobs);
  std::int32_t il = logprobs.id;
  auto wts = std::make_shared<std::vector<double>>(std::move(weights));
  auto ref = std::make_shared<Tensor>(ref_logprobs);
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [il, iv, wts, ref, wsum, rows, cols](Tape& t) {
      const double droot = t.grad_buffer(iv)[0];
      const Tensor& lp = t.node_data(il);
      Tensor& dlp = t.grad_buffer(il);
      for (std::int64_t r = 0; r < rows; ++r) {
        const double w = (*wts)[r];
        if (w == 0.0) continue;
        const double f = droot * w / wsum;
        for (std::int64_t c = 0; c < cols; ++c) {
          const double p = std::exp(lp.at(r, c));
          dlp.at(r, c) += f * p * (lp.at(r, c) - ref->at(r, c) + 1.0);
        }
      }
    };
  }
  return v;
}

Value Tape::affine2(Value a, Value b, double ca, double cb) {
  check(a);
  check(b);
  if (data(a).size() != 1 || data(b).size() != 1) throw ShapeError("affine2 expects scalars");
  Tensor out = Tensor::scalar(ca * data(a)[0] + cb * data(b)[0]);
  bool ng = needs_grad(a) || needs_grad(b);
  std::int32_t ia = a.id, ib = b.id;
  Value v = push(std::move(out), ng, nullptr);
  if (ng) {
    std::int32_t iv = v.id;
    nodes_[iv].backward_fn = [ia, ib, iv, ca, cb](Tape& t) {
      const double droot = t.grad_buffer(iv)[0];
      if (t.nodes_[ia].needs_grad && ca != 0.0) t.grad_buffer(ia)[0] += ca * droot;
      if (t.nodes_[ib].needs_grad && cb != 0.0) t.grad_buffer(ib)[0] += cb * droot;
    };
  }
  return v;
}

}  // namespace idda
