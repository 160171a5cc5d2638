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

#include "idda/training.hpp"

#include <json.hpp>

#include <cmath>
#include <utility>

#include "idda/autograd.hpp"
#include "idda/common.hpp"

namespace idda {

namespace {

std::int64_t count_supervised(const std::vector<double>& weights) {
  std::int64_t n = 0;
  for (double w : weights)
    if (w != 0.0) ++n;
  return n;
}

// KL(student || teacher) per row, forward arithmetic only (for reporting in
// the lambda == 0 short-circuit, where the KL node must stay off the tape).
double kl_value(const Tensor& student_lp, const Tensor& teacher_lp,
                const std::vector<double>& weights) {
  double acc = 0.0, wsum = 0.0;
  for (std::int64_t r = 0; r < student_lp.rows(); ++r) {
    const double w = weights[static_cast<std::size_t>(r)];
    if (w == 0.0) continue;
    wsum += w;
    double row = 0.0;
    for (std::int64_t k = 0; k < student_lp.cols(); ++k) {
      const double ls = student_lp.at(r, k);
      row += std::exp(ls) * (ls - teacher_lp.at(r, k));
    }
    acc += w * row;
  }
  return acc / wsum;
}

struct BuiltLoss {
  ForwardGraph graph;
  Value loss;
  LossBreakdown breakdown;
};

BuiltLoss build_loss(Tape& tape, const ModelParams& params, const Batch& batch,
                     const LossSpec& spec, bool with_grad) {
  if (spec.teacher != nullptr) {
    if (!(spec.teacher->config == params.config))
      throw ShapeError("kd loss: teacher and student configs differ");
    if (spec.lambda < 0.0 || spec.lambda > 1.0)
      throw ConfigError("kd loss: lambda must lie in [0,1]");
  }

  BuiltLoss out;
  out.graph = build_forward(tape, params, batch, with_grad);
  Value nll = tape.nll_pick(out.graph.logprobs, out.graph.labels, out.graph.weights);
  out.breakdown.nll_term = tape.data(nll).item();
  out.breakdown.token_count = count_supervised(out.graph.weights);

  if (spec.teacher == nullptr) {
    out.loss = nll;
    out.breakdown.total = out.breakdown.nll_term;
    return out;
  }

  ForwardResult teacher = forward(*spec.teacher, batch);
  if (spec.lambda == 0.0) {
    // Exact degeneration to fine-tuning: the differentiated graph is the NLL
    // graph itself, bit for bit; KL is measured off-tape for the logs.
    out.loss = nll;
    out.breakdown.kl_term =
        kl_value(tape.data(out.graph.logprobs), teacher.logprobs, out.graph.weights);
    out.breakdown.total = out.breakdown.nll_term;
    return out;
  }

  Value kl = tape.kl_rows(out.graph.logprobs, teacher.logprobs, out.graph.weights);
  out.breakdown.kl_term = tape.data(kl).item();
  out.loss = tape.affine2(nll, kl, 1.0 - spec.lambda, spec.lambda);
  out.breakdown.total = tape.data(out.loss).item();
  return out;
}

LossBreakdown loss_only(const ModelParams& params, const Batch& batch,
                        const LossSpec& spec) {
  Tape tape;
  return build_loss(tape, params, batch, spec, false).breakdown;
}

}  // namespace

LossBreakdown nll_loss(const ModelParams& params, const Batch& batch) {
  return loss_only(params, batch, LossSpec{});
}

LossBreakdown kd_loss(const ModelParams& params, const ModelParams& teacher,
                      const Batch& batch, double lambda) {
  return loss_only(params, batch, LossSpec{&teacher, lambda});
}

LossAndGrads backward(const ModelParams& params, const Batch& batch,
                      const LossSpec& spec) {
  Tape tape;
  BuiltLoss built = build_loss(tape, params, batch, spec, true);
  if (!std::isfinite(built.breakdown.total))
    throw NumericError("loss is not finite");
  tape.backward(built.loss);

  LossAndGrads out;
  out.loss = built.breakdown;
  for (const auto& [name, value] : built.graph.params) {
    Tensor g = tape.grad(value);
    if (!g.all_finite()) throw NumericError("non-finite gradient in tensor " + name);
    out.grads.emplace(name, std::move(g));
  }
  return out;
}

AdamConfig AdamConfig::from_config(const KvConfig& cfg) {
  AdamConfig a;
  a.lr = cfg.get_double_or("train.lr", a.lr);
  a.beta1 = cfg.get_double_or("train.beta1", a.beta1);
  a.beta2 = cfg.get_double_or("train.beta2", a.beta2);
  a.eps = cfg.get_double_or("train.eps_adam", a.eps);
  a.clip_norm = cfg.get_double_or("train.clip_norm", a.clip_norm);
  if (a.lr <= 0.0 || a.beta1 < 0.0 || a.beta1 >= 1.0 || a.beta2 < 0.0 ||
      a.beta2 >= 1.0 || a.eps <= 0.0 || a.clip_norm < 0.0)
    throw ConfigError("adam hyperparameters out of range");
  return a;
}

double clip_gradients(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (std::int64_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads)
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] *= scale;
  }
  return norm;
}

AdamState init_adam(const ModelParams& params) {
  AdamState s;
  for (const auto& [name, t] : params.tensors) {
    s.m.emplace(name, Tensor::zeros(t.shape()));
    s.v.emplace(name, Tensor::zeros(t.shape()));
  }
  return s;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const AdamConfig& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    if (!p.same_shape(g))
      throw ShapeError("adam_step: gradient shape mismatch for " + name);
    auto mi = state.m.find(name);
    auto vi = state.v.find(name);
    if (mi == state.m.end() || vi == state.v.end())
      throw InvariantError("adam_step: state missing tensor " + name);
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    for (std::int64_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

LossBreakdown train_step(ModelParams& params, const Batch& batch,
                         const LossSpec& spec, AdamState& state,
                         const AdamConfig& cfg) {
  LossAndGrads lg = backward(params, batch, spec);
  clip_gradients(lg.grads, cfg.clip_norm);
  adam_step(params, lg.grads, state, cfg);
  return lg.loss;
}

TrainLogger::TrainLogger(const std::string& path)
    : out_(path, std::ios::app) {
  if (!out_) throw IoError("cannot open training log: " + path);
}

void TrainLogger::log_step(std::int64_t step, const LossBreakdown& loss,
                           double wall_time_sec) {
  nlohmann::json rec{{"step", step},
                     {"loss_total", loss.total},
                     {"nll_term", loss.nll_term},
                     {"kl_term", loss.kl_term},
                     {"tokens", loss.token_count},
                     {"wall_time", wall_time_sec}};
  out_ << rec.dump() << "\n";
  out_.flush();
}

}  // namespace idda
