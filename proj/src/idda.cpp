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

#include "idda/idda.hpp"

#include <algorithm>
#include <utility>

#include "idda/common.hpp"

namespace idda {

// ---------------------------------------------------------------------------
// CheckpointRegistry
// ---------------------------------------------------------------------------

CheckpointRegistry::CheckpointRegistry(ModelParams initial, double initial_score)
    : best_(std::move(initial)), best_score_(initial_score) {
  history_.push_back({0, initial_score, true});
}

bool CheckpointRegistry::offer(ModelParams candidate, double dev_score,
                               std::int64_t iteration) {
  const bool accepted = dev_score > best_score_;
  history_.push_back({iteration, dev_score, accepted});
  if (accepted) {
    best_ = std::move(candidate);
    best_score_ = dev_score;
  }
  check();
  return accepted;
}

std::vector<double> CheckpointRegistry::best_series() const {
  std::vector<double> series;
  series.reserve(history_.size());
  double best = history_.front().dev_score;
  for (const RegistryEntry& e : history_) {
    if (e.accepted) best = std::max(best, e.dev_score);
    series.push_back(best);
  }
  return series;
}

void CheckpointRegistry::check() const {
  if (history_.empty() || !history_.front().accepted)
    throw InvariantError("registry must start from an accepted initial model");
  double max_accepted = history_.front().dev_score;
  double gate = history_.front().dev_score;
  for (std::size_t i = 1; i < history_.size(); ++i) {
    const RegistryEntry& e = history_[i];
    if (e.accepted && !(e.dev_score > gate))
      throw InvariantError("registry accepted a score that does not beat the incumbent");
    if (e.accepted) {
      gate = e.dev_score;
      max_accepted = std::max(max_accepted, e.dev_score);
    }
  }
  if (best_score_ != max_accepted)
    throw InvariantError("registry best score disagrees with its accepted history");
}

// ---------------------------------------------------------------------------
// The dual-transfer loop
// ---------------------------------------------------------------------------

std::string to_string(Direction d) {
  return d == Direction::kInToOut ? "in->out" : "out->in";
}

void IddaConfig::validate() const {
  if (k_iterations < 1) throw ConfigError("idda.k must be >= 1");
  transfer.validate();
}

IddaConfig IddaConfig::from_config(const KvConfig& cfg) {
  IddaConfig c;
  c.k_iterations = cfg.get_int_or("idda.k", c.k_iterations);
  c.early_exit = cfg.get_bool_or("idda.early_exit", c.early_exit);
  c.rng_seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", 1));
  const std::string mode = cfg.get_string_or("idda.mode", "full");
  if (mode == "full") c.mode = IddaMode::kFull;
  else if (mode == "unidir") c.mode = IddaMode::kUnidir;
  else if (mode == "fixtea") c.mode = IddaMode::kFixTeacher;
  else throw ConfigError("idda.mode must be full|unidir|fixtea, got '" + mode + "'");
  c.transfer = TransferConfig::from_config(cfg);
  c.validate();
  return c;
}

IddaResult run_idda(Trainer& trainer, const InitialModel& init_in,
                    const std::vector<std::pair<std::string, InitialModel>>& init_outs,
                    const IddaConfig& cfg, IddaObserver* observer,
                    const std::string& in_tag) {
  cfg.validate();
  if (init_outs.empty()) throw InputError("idda needs at least one out-domain");

  CheckpointRegistry reg_in(clone_params(init_in.model), init_in.dev_bleu);
  std::map<std::string, CheckpointRegistry> reg_out;
  for (const auto& [tag, init] : init_outs) {
    if (!reg_out.emplace(tag, CheckpointRegistry(clone_params(init.model), init.dev_bleu)).second)
      throw InputError("duplicate out-domain tag '" + tag + "'");
  }
  if (observer) {
    observer->on_initial(in_tag, init_in.model, init_in.dev_bleu);
    for (const auto& [tag, init] : init_outs)
      observer->on_initial(tag, init.model, init.dev_bleu);
  }

  // Frozen teachers for the fixTea ablation.
  const bool fix_teacher = cfg.mode == IddaMode::kFixTeacher;
  const bool unidir = cfg.mode == IddaMode::kUnidir;
  ModelParams teacher_in_0 = clone_params(init_in.model);
  std::map<std::string, ModelParams> teacher_out_0;
  if (fix_teacher)
    for (const auto& [tag, init] : init_outs)
      teacher_out_0.emplace(tag, clone_params(init.model));

  IddaResult result{clone_params(init_in.model), init_in.dev_bleu,
                    std::move(reg_in), std::move(reg_out), {}};

  // The in-domain candidate chain: each dual transfer continues from the
  // previous candidate, accepted or not.
  ModelParams chain = clone_params(init_in.model);

  for (std::int64_t k = 1; k <= cfg.k_iterations; ++k) {
    bool any_accepted = false;
    for (const auto& entry : init_outs) {
      const std::string& tag = entry.first;
      CheckpointRegistry& out_reg = result.registries_out.at(tag);

      // in -> out: ported out-domain candidate, distilled from the best
      // out-domain model so far.
      ModelParams cand_out = clone_params(out_reg.best());
      if (!unidir) {
        const ModelParams& teacher =
            fix_teacher ? teacher_out_0.at(tag) : out_reg.best();
        TransferOutcome res =
            trainer.transfer(chain, tag, teacher, k, Direction::kInToOut);
        cand_out = clone_params(res.model);
        const bool accepted = out_reg.offer(std::move(res.model), res.dev_score, k);
        any_accepted = any_accepted || accepted;
        if (observer)
          observer->on_candidate(k, Direction::kInToOut, tag, cand_out,
                                 res.dev_score, accepted);
        result.trace.push_back({k, Direction::kInToOut, tag, res.dev_score, accepted});
      }

      // out -> in: continue the in-domain chain from the fresh out-domain
      // candidate, distilled from the best in-domain model so far.
      const ModelParams& teacher_in =
          fix_teacher ? teacher_in_0 : result.registry_in.best();
      TransferOutcome res =
          trainer.transfer(cand_out, in_tag, teacher_in, k, Direction::kOutToIn);
      chain = clone_params(res.model);
      const bool accepted =
          result.registry_in.offer(std::move(res.model), res.dev_score, k);
      any_accepted = any_accepted || accepted;
      if (observer)
        observer->on_candidate(k, Direction::kOutToIn, in_tag, chain, res.dev_score,
                               accepted);
      result.trace.push_back({k, Direction::kOutToIn, tag, res.dev_score, accepted});
    }
    if (cfg.early_exit && !any_accepted) break;
  }

  result.model_in = clone_params(result.registry_in.best());
  result.dev_bleu_in = result.registry_in.best_score();
  return result;
}

// ---------------------------------------------------------------------------
// CorpusTrainer
// ---------------------------------------------------------------------------

CorpusTrainer::CorpusTrainer(DomainData in_domain, std::vector<DomainData> out_domains,
                             const BpeModel& bpe, const Vocabulary& vocab,
                             TransferConfig base_cfg, const std::string& log_path)
    : in_(std::move(in_domain)),
      outs_(std::move(out_domains)),
      bpe_(bpe),
      vocab_(vocab),
      base_(std::move(base_cfg)),
      log_path_(log_path) {
  base_.validate();
  if (in_.train == nullptr || in_.dev == nullptr)
    throw InputError("in-domain corpora must be set");
  for (const DomainData& d : outs_)
    if (d.train == nullptr || d.dev == nullptr)
      throw InputError("out-domain corpora must be set for '" + d.tag + "'");
}

const DomainData& CorpusTrainer::domain(const std::string& tag) const {
  if (tag == "in" || tag == in_.tag) return in_;
  for (const DomainData& d : outs_)
    if (d.tag == tag) return d;
  throw InputError("unknown domain tag '" + tag + "'");
}

TransferOutcome CorpusTrainer::transfer(const ModelParams& source,
                                        const std::string& domain_tag,
                                        const ModelParams& teacher,
                                        std::int64_t iteration, Direction dir) {
  const DomainData& d = domain(domain_tag);
  TransferConfig cfg = base_;
  cfg.rng_seed = derive_seed(base_.rng_seed, "transfer-k" + std::to_string(iteration) +
                                                 "-" + to_string(dir) + "-" + domain_tag);
  FitLog log{log_path_, iteration, to_string(dir) + ":" + domain_tag};
  const FitLog* log_ptr = log_path_.empty() ? nullptr : &log;
  TransferResult res =
      transfer_model(source, *d.train, teacher, *d.dev, bpe_, vocab_, cfg, log_ptr);
  return {std::move(res.model), res.dev_bleu};
}

double CorpusTrainer::evaluate(const ModelParams& model,
                               const std::string& domain_tag) const {
  const DomainData& d = domain(domain_tag);
  return eval_model(*d.dev, model, bpe_, vocab_, base_.decode);
}

// ---------------------------------------------------------------------------
// Corpus-level entry points
// ---------------------------------------------------------------------------

namespace {

InitialModel train_or_reuse(const InitialModel* given, const Corpus& train,
                            const Corpus& dev, const BpeModel& bpe,
                            const Vocabulary& vocab, const ModelConfig& model_cfg,
                            const TransferConfig& base, const std::string& tag,
                            std::uint64_t run_seed, const std::string& log_path) {
  if (given != nullptr)
    return {clone_params(given->model), given->dev_bleu};
  TransferConfig cfg = base;
  cfg.rng_seed = derive_seed(run_seed, "init-" + tag);
  cfg.lambda = 0.0;
  FitLog log{log_path, 0, "init:" + tag};
  const FitLog* log_ptr = log_path.empty() ? nullptr : &log;
  TransferResult res = train_initial(train, dev, bpe, vocab, model_cfg, cfg, log_ptr);
  return {std::move(res.model), res.dev_bleu};
}

}  // namespace

IddaResult idda_many_to_one(const DomainData& in_domain,
                            const std::vector<DomainDescriptor>& outs,
                            const BpeModel& bpe, const Vocabulary& vocab,
                            const ModelConfig& model_cfg, const IddaConfig& cfg,
                            IddaObserver* observer, const InitialModel* init_in,
                            const std::map<std::string, InitialModel>* init_outs,
                            const std::string& log_path) {
  cfg.validate();
  if (outs.empty()) throw InputError("idda needs at least one out-domain");
  if (in_domain.train == nullptr || in_domain.dev == nullptr)
    throw InputError("in-domain corpora must be set");

  const std::vector<DomainDescriptor> ordered = transfer_order(outs);

  std::vector<DomainData> out_data;
  out_data.reserve(ordered.size());
  for (const DomainDescriptor& d : ordered)
    out_data.push_back({d.domain_tag, d.train, d.dev});

  TransferConfig base = cfg.transfer;
  base.rng_seed = cfg.rng_seed;
  CorpusTrainer trainer(in_domain, out_data, bpe, vocab, base, log_path);

  InitialModel theta_in =
      train_or_reuse(init_in, *in_domain.train, *in_domain.dev, bpe, vocab,
                     model_cfg, base, "in", cfg.rng_seed, log_path);
  std::vector<std::pair<std::string, InitialModel>> theta_outs;
  for (const DomainData& d : out_data) {
    const InitialModel* given = nullptr;
    if (init_outs != nullptr) {
      auto it = init_outs->find(d.tag);
      if (it != init_outs->end()) given = &it->second;
    }
    theta_outs.emplace_back(
        d.tag, train_or_reuse(given, *d.train, *d.dev, bpe, vocab, model_cfg,
                              base, d.tag, cfg.rng_seed, log_path));
  }

  return run_idda(trainer, theta_in, theta_outs, cfg, observer,
                  in_domain.tag.empty() ? "in" : in_domain.tag);
}

IddaResult idda_one_to_one(const DomainData& in_domain, const DomainData& out_domain,
                           const BpeModel& bpe, const Vocabulary& vocab,
                           const ModelConfig& model_cfg, const IddaConfig& cfg,
                           IddaObserver* observer, const InitialModel* init_in,
                           const InitialModel* init_out, const std::string& log_path) {
  DomainDescriptor d;
  d.domain_tag = out_domain.tag;
  d.train = out_domain.train;
  d.dev = out_domain.dev;
  d.a_distance = 0.0;
  d.epsilon = 0.5;
  std::map<std::string, InitialModel> init_outs;
  const std::map<std::string, InitialModel>* init_outs_ptr = nullptr;
  if (init_out != nullptr) {
    init_outs.emplace(out_domain.tag,
                      InitialModel{clone_params(init_out->model), init_out->dev_bleu});
    init_outs_ptr = &init_outs;
  }
  return idda_many_to_one(in_domain, {d}, bpe, vocab, model_cfg, cfg, observer,
                          init_in, init_outs_ptr, log_path);
}

// ---------------------------------------------------------------------------
// Contrast models
// ---------------------------------------------------------------------------

BaselineKind baseline_kind_from_string(const std::string& name) {
  if (name == "single") return BaselineKind::kSingle;
  if (name == "mix") return BaselineKind::kMix;
  if (name == "ft") return BaselineKind::kFt;
  if (name == "mft") return BaselineKind::kMft;
  if (name == "kd") return BaselineKind::kKd;
  throw ConfigError("unknown baseline '" + name + "' (want single|mix|ft|mft|kd)");
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kSingle: return "single";
    case BaselineKind::kMix: return "mix";
    case BaselineKind::kFt: return "ft";
    case BaselineKind::kMft: return "mft";
    case BaselineKind::kKd: return "kd";
  }
  throw InvariantError("unreachable baseline kind");
}

BaselineRecipe baseline_recipe(BaselineKind kind, const TransferConfig& cfg) {
  BaselineRecipe r;
  r.final_stage = cfg;
  switch (kind) {
    case BaselineKind::kSingle:
      r.stages = {"train_initial(D_in)"};
      r.final_stage.lambda = 0.0;
      break;
    case BaselineKind::kMix:
      r.stages = {"train_initial(D_in + D_out)"};
      r.final_stage.lambda = 0.0;
      break;
    case BaselineKind::kFt:
      r.stages = {"train_initial(D_out)", "fit(D_in)"};
      r.final_stage.lambda = 0.0;
      break;
    case BaselineKind::kMft:
      r.stages = {"train_initial(D_out)", "fit(oversample_mix(D_in, D_out))"};
      r.final_stage.lambda = 0.0;
      break;
    case BaselineKind::kKd:
      r.stages = {"train_initial(D_out)", "train_initial(D_in)",
                  "fit(D_in, teacher=theta_in)"};
      r.uses_teacher = true;
      break;
  }
  return r;
}

namespace {

ModelParams stage_initial(const ModelParams* given, const Corpus& train,
                          const Corpus& dev, const BpeModel& bpe,
                          const Vocabulary& vocab, const ModelConfig& model_cfg,
                          const TransferConfig& cfg, const std::string& tag,
                          const FitLog* log) {
  if (given != nullptr) return clone_params(*given);
  TransferConfig stage = cfg;
  stage.rng_seed = derive_seed(cfg.rng_seed, "init-" + tag);
  stage.lambda = 0.0;
  return train_initial(train, dev, bpe, vocab, model_cfg, stage, log).model;
}

}  // namespace

BaselineResult run_baseline(BaselineKind kind, const Corpus& d_in, const Corpus& dev_in,
                            const Corpus* d_out, const Corpus* dev_out,
                            const BpeModel& bpe, const Vocabulary& vocab,
                            const ModelConfig& model_cfg, const TransferConfig& cfg,
                            const ModelParams* init_in, const ModelParams* init_out,
                            const FitLog* log) {
  cfg.validate();
  const bool needs_out = kind != BaselineKind::kSingle;
  if (needs_out && (d_out == nullptr || dev_out == nullptr))
    throw InputError("baseline '" + to_string(kind) + "' needs an out-domain corpus");

  const BaselineRecipe recipe = baseline_recipe(kind, cfg);
  TransferConfig final_cfg = recipe.final_stage;
  final_cfg.rng_seed = derive_seed(cfg.rng_seed, "baseline-" + to_string(kind));

  switch (kind) {
    case BaselineKind::kSingle: {
      if (init_in != nullptr) {
        ModelParams m = clone_params(*init_in);
        const double bleu = eval_model(dev_in, m, bpe, vocab, cfg.decode);
        return {std::move(m), bleu};
      }
      TransferResult res =
          train_initial(d_in, dev_in, bpe, vocab, model_cfg, final_cfg, log);
      return {std::move(res.model), res.dev_bleu};
    }
    case BaselineKind::kMix: {
      const Corpus mixed =
          concat_corpora({&d_in, d_out}, "mix", CorpusRole::kTrain);
      TransferResult res =
          train_initial(mixed, dev_in, bpe, vocab, model_cfg, final_cfg, log);
      return {std::move(res.model), res.dev_bleu};
    }
    case BaselineKind::kFt: {
      ModelParams theta_out = stage_initial(init_out, *d_out, *dev_out, bpe, vocab,
                                            model_cfg, cfg, "out", log);
      TransferResult res = fit_model(std::move(theta_out), d_in, dev_in, nullptr,
                                     bpe, vocab, final_cfg, log);
      return {std::move(res.model), res.dev_bleu};
    }
    case BaselineKind::kMft: {
      ModelParams theta_out = stage_initial(init_out, *d_out, *dev_out, bpe, vocab,
                                            model_cfg, cfg, "out", log);
      const Corpus mixed = oversample_mix(d_in, *d_out);
      TransferResult res = fit_model(std::move(theta_out), mixed, dev_in, nullptr,
                                     bpe, vocab, final_cfg, log);
      return {std::move(res.model), res.dev_bleu};
    }
    case BaselineKind::kKd: {
      ModelParams theta_out = stage_initial(init_out, *d_out, *dev_out, bpe, vocab,
                                            model_cfg, cfg, "out", log);
      ModelParams theta_in = stage_initial(init_in, d_in, dev_in, bpe, vocab,
                                           model_cfg, cfg, "in", log);
      TransferResult res = fit_model(std::move(theta_out), d_in, dev_in, &theta_in,
                                     bpe, vocab, final_cfg, log);
      return {std::move(res.model), res.dev_bleu};
    }
  }
  throw InvariantError("unreachable baseline kind");
}

}  // namespace idda
