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

#ifndef IDDA_TRAINING_HPP
#define IDDA_TRAINING_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "idda/batch.hpp"
#include "idda/model.hpp"
#include "idda/tensor.hpp"

namespace idda {

// Per-batch loss summary. When produced by kd_loss,
// total == (1-lambda)*nll_term + lambda*kl_term.
struct LossBreakdown {
  double total = 0.0;
  double nll_term = 0.0;
  double kl_term = 0.0;
  std::int64_t token_count = 0;  // supervised (non-pad) target positions
};

// Gradient tensors keyed by parameter name, shapes mirroring ModelParams.
using Gradients = std::map<std::string, Tensor>;

// Which loss to differentiate: plain NLL (teacher == nullptr) or
// knowledge distillation against a frozen teacher.
struct LossSpec {
  const ModelParams* teacher = nullptr;
  double lambda = 0.0;
};

// Mean negative log-likelihood over non-pad target tokens.
LossBreakdown nll_loss(const ModelParams& params, const Batch& batch);

// Distillation loss: (1-lambda)*NLL + lambda*KL(student || teacher), both
// teacher-forced on the reference prefix; KL is the per-token full-vocabulary
// divergence averaged over non-pad positions. The teacher contributes no
// gradient. lambda == 0 degenerates to nll_loss exactly.
LossBreakdown kd_loss(const ModelParams& params, const ModelParams& teacher,
                      const Batch& batch, double lambda);

struct LossAndGrads {
  LossBreakdown loss;
  Gradients grads;
};

// Differentiates the specified loss w.r.t. every parameter tensor.
LossAndGrads backward(const ModelParams& params, const Batch& batch,
                      const LossSpec& spec);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global L2 gradient clip; 0 disables

  static AdamConfig from_config(const KvConfig& cfg);
};

// Scales `grads` in place so their global L2 norm is at most max_norm
// (no-op when max_norm <= 0 or the norm is already within bounds).
// Returns the pre-clip global norm.
double clip_gradients(Gradients& grads, double max_norm);

struct AdamState {
  std::int64_t step = 0;
  std::map<std::string, Tensor> m;  // first moments
  std::map<std::string, Tensor> v;  // second moments
};

AdamState init_adam(const ModelParams& params);

// Standard Adam update with bias correction; increments the step counter.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const AdamConfig& cfg);

// Convenience: backward + adam_step on one batch. Returns the loss measured
// before the update.
LossBreakdown train_step(ModelParams& params, const Batch& batch,
                         const LossSpec& spec, AdamState& state,
                         const AdamConfig& cfg);

// Appends one structured record per optimizer step to a line-delimited log.
class TrainLogger {
 public:
  explicit TrainLogger(const std::string& path);
  void log_step(std::int64_t step, const LossBreakdown& loss, double wall_time_sec);

 private:
  std::ofstream out_;
};

}  // namespace idda

#endif  // IDDA_TRAINING_HPP
