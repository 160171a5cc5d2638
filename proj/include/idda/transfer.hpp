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

#ifndef IDDA_TRANSFER_HPP
#define IDDA_TRANSFER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "idda/corpus.hpp"
#include "idda/decoding.hpp"
#include "idda/model.hpp"
#include "idda/tokenization.hpp"
#include "idda/training.hpp"

namespace idda {

// Schedule and hyperparameters for one training/transfer call.
struct TransferConfig {
  double lambda = 0.4;             // distillation coefficient of the KD loss
  std::int64_t max_epochs = 8;
  std::int64_t patience = 3;       // non-improving dev evaluations before stop
  std::int64_t dev_eval_every = 40;  // optimizer steps between evaluations
  std::uint64_t rng_seed = 1;
  std::int64_t token_budget = 1200;  // batch size cap in true tokens
  AdamConfig adam;
  DecodeConfig decode;

  void validate() const;
  static TransferConfig from_config(const KvConfig& cfg);
};

// Outcome of one fit: the best-on-dev checkpoint plus the full trajectory.
struct TransferResult {
  ModelParams model;
  double dev_bleu = 0.0;           // dev score of the returned checkpoint
  std::int64_t selected_step = 0;  // optimizer step it was captured at
  std::vector<LossBreakdown> losses;            // one entry per optimizer step
  std::vector<std::pair<std::int64_t, double>> evals;  // (step, dev BLEU)
};

// Optional JSONL sink for per-transfer records; iteration/direction tag the
// records when the call happens inside the IDDA loop.
struct FitLog {
  std::string path;
  std::int64_t iteration = -1;
  std::string direction;
};

// Trains `student` (consumed by value) on `corpus`, selecting the checkpoint
// with the highest dev BLEU. teacher == nullptr trains with plain NLL;
// otherwise with the KD loss at cfg.lambda. Evaluates before the first step
// and every cfg.dev_eval_every steps; stops early after cfg.patience
// non-improving evaluations.
TransferResult fit_model(ModelParams student, const Corpus& corpus, const Corpus& dev,
                         const ModelParams* teacher, const BpeModel& bpe,
                         const Vocabulary& vocab, const TransferConfig& cfg,
                         const FitLog* log = nullptr);

// Algorithm 1 line 3: train a fresh model on D with the NLL loss.
TransferResult train_initial(const Corpus& corpus, const Corpus& dev,
                             const BpeModel& bpe, const Vocabulary& vocab,
                             const ModelConfig& model_cfg, const TransferConfig& cfg,
                             const FitLog* log = nullptr);

// Algorithm 1's TransferModel: copy the source model, then distill against
// the frozen teacher on `corpus`. `on_init` (when set) observes the student
// right after initialization, before any optimizer step.
TransferResult transfer_model(const ModelParams& source, const Corpus& corpus,
                              const ModelParams& teacher, const Corpus& dev,
                              const BpeModel& bpe, const Vocabulary& vocab,
                              const TransferConfig& cfg, const FitLog* log = nullptr,
                              const std::function<void(const ModelParams&)>& on_init = {});

}  // namespace idda

#endif  // IDDA_TRANSFER_HPP
