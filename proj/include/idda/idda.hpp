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

#ifndef IDDA_IDDA_HPP
#define IDDA_IDDA_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "idda/adist.hpp"
#include "idda/model.hpp"
#include "idda/transfer.hpp"

namespace idda {

// One candidate model offered to a registry: either it beat the incumbent
// best dev score (accepted) or it did not.
struct RegistryEntry {
  std::int64_t iteration = 0;
  double dev_score = 0.0;
  bool accepted = false;
};

// Per-domain best-checkpoint tracker. Seeded with the initial model at
// iteration 0 (which counts as accepted); `offer` applies the strict ">"
// acceptance gate of the dual-transfer loop.
class CheckpointRegistry {
 public:
  CheckpointRegistry(ModelParams initial, double initial_score);

  // Accepts `candidate` iff dev_score is strictly greater than the current
  // best. Records the attempt in the history either way and returns whether
  // it was accepted.
  bool offer(ModelParams candidate, double dev_score, std::int64_t iteration);

  const ModelParams& best() const { return best_; }
  double best_score() const { return best_score_; }
  const std::vector<RegistryEntry>& history() const { return history_; }

  // The best-so-far dev score after each history entry (a non-decreasing
  // series; handy for iteration curves).
  std::vector<double> best_series() const;

  // Throws InvariantError if the recorded best disagrees with the history's
  // accepted maximum (e.g. after reloading a tampered registry log).
  void check() const;

 private:
  ModelParams best_;
  double best_score_ = 0.0;
  std::vector<RegistryEntry> history_;
};

// ---------------------------------------------------------------------------
// Orchestration engine. The dual-transfer loop is written against an abstract
// Trainer so the control flow (chains, teachers, gates) can be tested as pure
// logic; CorpusTrainer is the real implementation on top of transfer_model.
// ---------------------------------------------------------------------------

enum class Direction { kInToOut, kOutToIn };

std::string to_string(Direction d);

struct TransferOutcome {
  ModelParams model;
  double dev_score = 0.0;
};

class Trainer {
 public:
  virtual ~Trainer() = default;

  // Trains a student initialized from `source` toward `domain_tag`'s corpus,
  // distilling from `teacher`; returns the best-on-dev checkpoint and its
  // dev score on that domain's dev set.
  virtual TransferOutcome transfer(const ModelParams& source,
                                   const std::string& domain_tag,
                                   const ModelParams& teacher,
                                   std::int64_t iteration, Direction dir) = 0;
};

// Observes every candidate (plus the initial models), e.g. to persist
// checkpoints and the registry log of a run directory.
class IddaObserver {
 public:
  virtual ~IddaObserver() = default;
  virtual void on_initial(const std::string& domain, const ModelParams& model,
                          double dev_score) {
    (void)domain; (void)model; (void)dev_score;
  }
  virtual void on_candidate(std::int64_t iteration, Direction dir,
                            const std::string& domain, const ModelParams& model,
                            double dev_score, bool accepted) {
    (void)iteration; (void)dir; (void)domain; (void)model;
    (void)dev_score; (void)accepted;
  }
};

enum class IddaMode {
  kFull,        // the complete dual loop
  kUnidir,      // ablation: skip every in->out transfer
  kFixTeacher,  // ablation: teachers stay pinned at the initial models
};

struct IddaConfig {
  std::int64_t k_iterations = 3;
  TransferConfig transfer;
  std::uint64_t rng_seed = 1;
  bool early_exit = false;  // stop once a full iteration accepts nothing
  IddaMode mode = IddaMode::kFull;

  void validate() const;
  static IddaConfig from_config(const KvConfig& cfg);
};

// A trained starting checkpoint with its dev score.
struct InitialModel {
  ModelParams model;
  double dev_bleu = 0.0;
};

struct TraceEvent {
  std::int64_t iteration = 0;
  Direction direction = Direction::kInToOut;
  std::string domain;  // the out-domain involved in this transfer
  double dev_score = 0.0;
  bool accepted = false;
};

struct IddaResult {
  ModelParams model_in;  // theta*_in, the declared output of the loop
  double dev_bleu_in = 0.0;
  CheckpointRegistry registry_in;
  std::map<std::string, CheckpointRegistry> registries_out;
  std::vector<TraceEvent> trace;
};

// Runs the dual-transfer loop over pre-trained initial models. `init_outs`
// must already be in transfer order (most distant domain first). `in_tag`
// names the in-domain toward the trainer and observer.
IddaResult run_idda(Trainer& trainer, const InitialModel& init_in,
                    const std::vector<std::pair<std::string, InitialModel>>& init_outs,
                    const IddaConfig& cfg, IddaObserver* observer = nullptr,
                    const std::string& in_tag = "in");

// ---------------------------------------------------------------------------
// Corpus-level entry points.
// ---------------------------------------------------------------------------

struct DomainData {
  std::string tag;
  const Corpus* train = nullptr;
  const Corpus* dev = nullptr;
};

// Real Trainer: each call derives its own sub-seed from (iteration,
// direction, domain) and runs transfer_model on that domain's corpora.
class CorpusTrainer : public Trainer {
 public:
  CorpusTrainer(DomainData in_domain, std::vector<DomainData> out_domains,
                const BpeModel& bpe, const Vocabulary& vocab,
                TransferConfig base_cfg, const std::string& log_path = "");

  TransferOutcome transfer(const ModelParams& source, const std::string& domain_tag,
                           const ModelParams& teacher, std::int64_t iteration,
                           Direction dir) override;

  double evaluate(const ModelParams& model, const std::string& domain_tag) const;

 private:
  const DomainData& domain(const std::string& tag) const;

  DomainData in_;
  std::vector<DomainData> outs_;
  const BpeModel& bpe_;
  const Vocabulary& vocab_;
  TransferConfig base_;
  std::string log_path_;
};

// Many-to-one IDDA: orders `outs` by descending a-distance, trains (or
// reuses) the initial models, then runs the dual loop against each
// out-domain in turn within every iteration. Initial models may be supplied
// to share them across runs; otherwise they are trained with sub-seeds
// derived from cfg.rng_seed.
IddaResult idda_many_to_one(const DomainData& in_domain,
                            const std::vector<DomainDescriptor>& outs,
                            const BpeModel& bpe, const Vocabulary& vocab,
                            const ModelConfig& model_cfg, const IddaConfig& cfg,
                            IddaObserver* observer = nullptr,
                            const InitialModel* init_in = nullptr,
                            const std::map<std::string, InitialModel>* init_outs = nullptr,
                            const std::string& log_path = "");

// One-to-one IDDA (Algorithm 1): the N=1 case of the many-to-one loop.
IddaResult idda_one_to_one(const DomainData& in_domain, const DomainData& out_domain,
                           const BpeModel& bpe, const Vocabulary& vocab,
                           const ModelConfig& model_cfg, const IddaConfig& cfg,
                           IddaObserver* observer = nullptr,
                           const InitialModel* init_in = nullptr,
                           const InitialModel* init_out = nullptr,
                           const std::string& log_path = "");

// ---------------------------------------------------------------------------
// Contrast models.
// ---------------------------------------------------------------------------

enum class BaselineKind { kSingle, kMix, kFt, kMft, kKd };

BaselineKind baseline_kind_from_string(const std::string& name);
std::string to_string(BaselineKind kind);

// The stages a baseline executes, introspectable without running them.
struct BaselineRecipe {
  std::vector<std::string> stages;
  TransferConfig final_stage;  // config of the last fit
  bool uses_teacher = false;
};

BaselineRecipe baseline_recipe(BaselineKind kind, const TransferConfig& cfg);

struct BaselineResult {
  ModelParams model;
  double dev_bleu_in = 0.0;
};

// Runs one contrast model. d_out/dev_out may be null for `single`.
// init_in/init_out, when given, stand in for the internally trained
// theta^(0) checkpoints (so baselines can share starts with an IDDA run).
BaselineResult run_baseline(BaselineKind kind, const Corpus& d_in, const Corpus& dev_in,
                            const Corpus* d_out, const Corpus* dev_out,
                            const BpeModel& bpe, const Vocabulary& vocab,
                            const ModelConfig& model_cfg, const TransferConfig& cfg,
                            const ModelParams* init_in = nullptr,
                            const ModelParams* init_out = nullptr,
                            const FitLog* log = nullptr);

}  // namespace idda

#endif  // IDDA_IDDA_HPP
