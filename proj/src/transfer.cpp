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

#include "idda/transfer.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <utility>

#include "idda/batch.hpp"
#include "idda/common.hpp"

namespace idda {

void TransferConfig::validate() const {
  if (lambda < 0.0 || lambda > 1.0)
    throw ConfigError("transfer: lambda must lie in [0,1]");
  if (max_epochs < 1) throw ConfigError("transfer: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("transfer: patience must be >= 1");
  if (dev_eval_every < 1) throw ConfigError("transfer: dev_eval_every must be >= 1");
  if (token_budget < 1) throw ConfigError("transfer: token_budget must be >= 1");
}

TransferConfig TransferConfig::from_config(const KvConfig& cfg) {
  TransferConfig t;
  t.lambda = cfg.get_double_or("train.lambda", t.lambda);
  t.max_epochs = cfg.get_int_or("train.max_epochs", t.max_epochs);
  t.patience = cfg.get_int_or("train.patience", t.patience);
  t.dev_eval_every = cfg.get_int_or("train.dev_eval_every", t.dev_eval_every);
  t.token_budget = cfg.get_int_or("train.token_budget", t.token_budget);
  t.rng_seed = static_cast<std::uint64_t>(cfg.get_int_or("seed", 1));
  t.adam = AdamConfig::from_config(cfg);
  t.decode = DecodeConfig::from_config(cfg);
  t.validate();
  return t;
}

namespace {

class FitLogger {
 public:
  FitLogger(const FitLog* log, const TransferConfig& cfg) {
    if (log == nullptr || log->path.empty()) return;
    out_.open(log->path, std::ios::app);
    if (!out_) throw IoError("cannot open transfer log: " + log->path);
    nlohmann::json rec{{"event", "begin"},
                       {"iteration", log->iteration},
                       {"direction", log->direction},
                       {"lambda", cfg.lambda}};
    out_ << rec.dump() << "\n";
  }

  void write(nlohmann::json rec) {
    if (!out_.is_open()) return;
    out_ << rec.dump() << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace

TransferResult fit_model(ModelParams student, const Corpus& corpus, const Corpus& dev,
                         const ModelParams* teacher, const BpeModel& bpe,
                         const Vocabulary& vocab, const TransferConfig& cfg,
                         const FitLog* log) {
  cfg.validate();
  if (corpus.empty()) throw InputError("fit: empty training corpus");
  if (dev.empty()) throw InputError("fit: empty dev corpus");
  if (teacher != nullptr && !(teacher->config == student.config))
    throw ShapeError("fit: teacher and student configs differ");

  FitLogger logger(log, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  LossSpec spec{teacher, cfg.lambda};
  AdamState opt = init_adam(student);

  TransferResult best;
  best.dev_bleu = eval_model(dev, student, bpe, vocab, cfg.decode);
  best.model = clone_params(student);
  best.selected_step = 0;
  best.evals.emplace_back(0, best.dev_bleu);
  logger.write({{"event", "eval"}, {"step", 0}, {"dev_bleu", best.dev_bleu},
                {"improved", true}});

  std::int64_t step = 0;
  std::int64_t stale = 0;
  bool stop = false;

  auto evaluate = [&]() {
    const double bleu = eval_model(dev, student, bpe, vocab, cfg.decode);
    best.evals.emplace_back(step, bleu);
    const bool improved = bleu > best.dev_bleu;
    logger.write({{"event", "eval"}, {"step", step}, {"dev_bleu", bleu},
                  {"improved", improved}});
    if (improved) {
      best.dev_bleu = bleu;
      best.model = clone_params(student);
      best.selected_step = step;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      stop = true;
    }
  };

  for (std::int64_t epoch = 0; epoch < cfg.max_epochs && !stop; ++epoch) {
    const std::uint64_t epoch_seed =
        derive_seed(cfg.rng_seed, "epoch-" + std::to_string(epoch));
    std::vector<Batch> batches =
        make_batches(corpus, bpe, vocab, cfg.token_budget, epoch_seed);
    if (batches.empty()) throw InputError("fit: batching produced no batches");
    for (const Batch& b : batches) {
      ++step;
      LossBreakdown loss = train_step(student, b, spec, opt, cfg.adam);
      best.losses.push_back(loss);
      logger.write({{"event", "step"}, {"step", step}, {"loss_total", loss.total},
                    {"nll_term", loss.nll_term}, {"kl_term", loss.kl_term},
                    {"tokens", loss.token_count}, {"wall_time", elapsed()}});
      if (step % cfg.dev_eval_every == 0) {
        evaluate();
        if (stop) break;
      }
    }
  }
  // Consider the final state when the loop ended between scheduled
  // evaluations.
  if (!stop && step % cfg.dev_eval_every != 0) evaluate();

  logger.write({{"event", "selected"}, {"step", best.selected_step},
                {"dev_bleu", best.dev_bleu}, {"steps_run", step},
                {"wall_time", elapsed()}});
  return best;
}

TransferResult train_initial(const Corpus& corpus, const Corpus& dev,
                             const BpeModel& bpe, const Vocabulary& vocab,
                             const ModelConfig& model_cfg, const TransferConfig& cfg,
                             const FitLog* log) {
  ModelParams student = init_model(model_cfg, derive_seed(cfg.rng_seed, "model-init"));
  return fit_model(std::move(student), corpus, dev, nullptr, bpe, vocab, cfg, log);
}

TransferResult transfer_model(const ModelParams& source, const Corpus& corpus,
                              const ModelParams& teacher, const Corpus& dev,
                              const BpeModel& bpe, const Vocabulary& vocab,
                              const TransferConfig& cfg, const FitLog* log,
                              const std::function<void(const ModelParams&)>& on_init) {
  if (!(source.config == teacher.config))
    throw ShapeError("transfer: source and teacher configs differ");
  ModelParams student = clone_params(source);
  if (on_init) on_init(student);
  return fit_model(std::move(student), corpus, dev, &teacher, bpe, vocab, cfg, log);
}

}  // namespace idda
