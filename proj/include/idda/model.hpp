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

#ifndef IDDA_MODEL_HPP
#define IDDA_MODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "idda/autograd.hpp"
#include "idda/batch.hpp"
#include "idda/config.hpp"
#include "idda/tensor.hpp"

namespace idda {

// Pre-norm Transformer encoder-decoder, dimensionally scaled down: learned
// positional embeddings, multihead attention, ReLU feed-forward, untied
// embeddings and output projection. All math is 64-bit.
struct ModelConfig {
  std::int64_t embed_dim = 64;
  std::int64_t hidden_dim = 128;
  std::int64_t num_heads = 2;
  std::int64_t num_layers = 1;
  std::int64_t vocab_size = 0;  // must be set from the joint vocabulary
  std::int64_t max_positions = 64;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  static ModelConfig from_config(const KvConfig& cfg, std::int64_t vocab_size);
};

struct ParamSpec {
  std::string name;
  std::vector<std::int64_t> shape;
};

// The full named-tensor schema for a config, in fixed order.
std::vector<ParamSpec> param_specs(const ModelConfig& config);

// One model's parameters. Value semantics: copying is a deep clone.
struct ModelParams {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::int64_t total_params() const;
  bool all_finite() const;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t rng_seed);

ModelParams clone_params(const ModelParams& params);

// Versioned binary checkpoint ("IDDACKPT", little-endian); see README.
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

// Teacher-forced forward graph over a batch. `logprobs` holds one row per
// decoder position ([batch * (tgt_len - 1), vocab]); row i*(tgt_len-1)+t
// predicts target position t+1 of sentence i. `labels` are the flattened
// next-token ids and `weights` are 1 on real positions, 0 on padding.
struct ForwardGraph {
  Value logprobs;
  SeqLayout layout;  // decoder-position layout (lens = tgt_lens - 1)
  std::vector<std::int64_t> labels;
  std::vector<double> weights;
  // Leaf handle per parameter tensor (populated only when with_grad); read
  // gradients after backward() via tape.grad(params.at(name)).
  std::map<std::string, Value> params;
};

// Builds the graph on the caller's tape. With with_grad, parameters enter as
// leaves (gradients flow to them); otherwise as constants. `params` and
// `batch` must outlive the tape.
ForwardGraph build_forward(Tape& tape, const ModelParams& params, const Batch& batch,
                           bool with_grad);

// Inference-only forward: the emitted log-probability rows plus bookkeeping.
struct ForwardResult {
  Tensor logprobs;
  SeqLayout layout;
  std::vector<std::int64_t> labels;
  std::vector<double> weights;
};

ForwardResult forward(const ModelParams& params, const Batch& batch);

// Decoding support: run the encoder over one source sentence once, then
// re-score growing target prefixes against the cached encoder states.
struct EncodedSource {
  Tensor states;  // [src_len, embed_dim]
};

EncodedSource encode_source(const ModelParams& params,
                            const std::vector<std::int64_t>& src_ids);

// Log-probability rows for every position of `prefix` (causal, teacher-free);
// row t is the next-token distribution after consuming prefix[0..t].
Tensor prefix_logprobs(const ModelParams& params, const EncodedSource& source,
                       const std::vector<std::int64_t>& prefix);

}  // namespace idda

#endif  // IDDA_MODEL_HPP
