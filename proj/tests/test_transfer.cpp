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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "idda/common.hpp"
#include "idda/corpus.hpp"
#include "idda/synth.hpp"
#include "idda/tokenization.hpp"
#include "idda/transfer.hpp"

using namespace idda;

namespace {

struct Task {
  Corpus train;
  Corpus dev;
  BpeModel bpe;
  Vocabulary vocab;
  ModelConfig model;
};

Task make_task(std::int64_t train_pairs = 60, std::int64_t dev_pairs = 12) {
  SynthSpec s;
  s.domain_tag = "toy";
  s.rule_seed = 5;
  s.vocab_size = 24;
  s.num_pairs = train_pairs;
  s.min_words = 3;
  s.max_words = 6;

  Task t;
  t.train = synth_domain_corpus(s, 100, CorpusRole::kTrain);
  s.num_pairs = dev_pairs;
  t.dev = synth_domain_corpus(s, 101, CorpusRole::kDev);
  Corpus joint = concat_corpora({&t.train, &t.dev}, "joint", CorpusRole::kTrain);
  t.bpe = learn_bpe(joint, 160);
  t.vocab = build_vocab(joint, t.bpe, 200);

  t.model.embed_dim = 24;
  t.model.hidden_dim = 48;
  t.model.num_heads = 2;
  t.model.num_layers = 1;
  t.model.vocab_size = t.vocab.size();
  t.model.max_positions = 32;
  return t;
}

TransferConfig quick_cfg() {
  TransferConfig c;
  c.lambda = 0.4;
  c.max_epochs = 2;
  c.patience = 3;
  c.dev_eval_every = 10;
  c.rng_seed = 7;
  c.token_budget = 300;
  c.decode.beam_size = 2;
  c.decode.max_len = 16;
  return c;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (const auto& [name, t] : a.tensors)
    for (std::int64_t i = 0; i < t.size(); ++i)
      if (t[i] != b.at(name)[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("config invariants are enforced") {
  TransferConfig c = quick_cfg();
  c.max_epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quick_cfg();
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = quick_cfg();
  c.lambda = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("degenerate inputs error instead of silently returning the source") {
  Task t = make_task();
  ModelParams m = init_model(t.model, 1);
  TransferConfig cfg = quick_cfg();

  Corpus empty;
  CHECK_THROWS_AS(
      fit_model(clone_params(m), empty, t.dev, nullptr, t.bpe, t.vocab, cfg),
      InputError);

  // A token budget smaller than one sentence cannot produce any batch.
  TransferConfig tiny = cfg;
  tiny.token_budget = 2;
  CHECK_THROWS_AS(
      fit_model(clone_params(m), t.train, t.dev, nullptr, t.bpe, t.vocab, tiny),
      ConfigError);
}

TEST_CASE("lambda 0 transfer is loss-identical to a plain nll run") {
  Task t = make_task();
  ModelParams source = init_model(t.model, 3);
  ModelParams teacher = init_model(t.model, 4);
  TransferConfig cfg = quick_cfg();
  cfg.lambda = 0.0;

  TransferResult kd = transfer_model(source, t.train, teacher, t.dev, t.bpe,
                                     t.vocab, cfg);
  TransferResult nll =
      fit_model(clone_params(source), t.train, t.dev, nullptr, t.bpe, t.vocab, cfg);

  REQUIRE(kd.losses.size() == nll.losses.size());
  for (std::size_t i = 0; i < kd.losses.size(); ++i) {
    CHECK(kd.losses[i].total == nll.losses[i].total);
    CHECK(kd.losses[i].nll_term == nll.losses[i].nll_term);
  }
  CHECK(kd.dev_bleu == nll.dev_bleu);
  CHECK(params_equal(kd.model, nll.model));
}

TEST_CASE("student starts as an exact copy of the source") {
  Task t = make_task();
  ModelParams source = init_model(t.model, 8);
  ModelParams teacher = init_model(t.model, 9);
  TransferConfig cfg = quick_cfg();
  cfg.max_epochs = 1;

  bool probed = false;
  transfer_model(source, t.train, teacher, t.dev, t.bpe, t.vocab, cfg, nullptr,
                 [&](const ModelParams& student) {
                   probed = true;
                   CHECK(params_equal(student, source));
                 });
  CHECK(probed);
}

TEST_CASE("teacher bits never change during a transfer") {
  Task t = make_task();
  ModelParams source = init_model(t.model, 8);
  ModelParams teacher = init_model(t.model, 9);
  ModelParams teacher_before = clone_params(teacher);
  TransferConfig cfg = quick_cfg();
  cfg.max_epochs = 1;
  transfer_model(source, t.train, teacher, t.dev, t.bpe, t.vocab, cfg);
  CHECK(params_equal(teacher, teacher_before));
}

TEST_CASE("returned checkpoint carries the maximum observed dev score") {
  Task t = make_task();
  TransferConfig cfg = quick_cfg();
  TransferResult r =
      train_initial(t.train, t.dev, t.bpe, t.vocab, t.model, cfg);

  REQUIRE(!r.evals.empty());
  double max_seen = r.evals.front().second;
  for (const auto& [step, bleu] : r.evals) max_seen = std::max(max_seen, bleu);
  CHECK(r.dev_bleu == max_seen);

  // Re-evaluating the returned model reproduces its recorded score exactly.
  const double again = eval_model(t.dev, r.model, t.bpe, t.vocab, cfg.decode);
  CHECK(again == r.dev_bleu);

  // The evaluation schedule includes step 0 and the number of optimizer steps
  // matches the loss trajectory.
  CHECK(r.evals.front().first == 0);
  CHECK(!r.losses.empty());
}

TEST_CASE("identical fits are bit-identical") {
  Task t = make_task();
  TransferConfig cfg = quick_cfg();
  TransferResult a = train_initial(t.train, t.dev, t.bpe, t.vocab, t.model, cfg);
  TransferResult b = train_initial(t.train, t.dev, t.bpe, t.vocab, t.model, cfg);
  CHECK(params_equal(a.model, b.model));
  CHECK(a.dev_bleu == b.dev_bleu);
  CHECK(a.evals == b.evals);
  CHECK(a.selected_step == b.selected_step);
}

TEST_CASE("config mismatch is rejected up front") {
  Task t = make_task();
  ModelParams source = init_model(t.model, 1);
  ModelConfig other = t.model;
  other.embed_dim = 16;
  other.num_heads = 2;
  ModelParams teacher = init_model(other, 1);
  CHECK_THROWS_AS(
      transfer_model(source, t.train, teacher, t.dev, t.bpe, t.vocab, quick_cfg()),
      ShapeError);
}

TEST_CASE("training reduces the loss and can lift dev BLEU on a memorizable task") {
  // Train and evaluate on the same 30 pairs: enough optimization must drive
  // the loss down sharply and raise BLEU above the untrained score.
  Task t = make_task(30, 30);
  Corpus dev = t.train;
  dev.role = CorpusRole::kDev;
  TransferConfig cfg = quick_cfg();
  cfg.max_epochs = 40;
  cfg.patience = 100;
  cfg.dev_eval_every = 40;
  cfg.adam.lr = 3e-3;
  TransferResult r = train_initial(t.train, dev, t.bpe, t.vocab, t.model, cfg);

  REQUIRE(r.losses.size() > 20);
  CHECK(r.losses.back().total < 0.5 * r.losses.front().total);
  CHECK(r.dev_bleu > r.evals.front().second);
  CHECK(r.selected_step > 0);
}

TEST_CASE("fit log records begin, steps, evals, and the selection") {
  Task t = make_task();
  TransferConfig cfg = quick_cfg();
  cfg.max_epochs = 1;
  const std::string path = "test_transfer_log.jsonl";
  std::remove(path.c_str());
  FitLog log{path, 2, "toy->toy"};
  train_initial(t.train, t.dev, t.bpe, t.vocab, t.model, cfg, &log);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  int begins = 0, steps = 0, evals = 0, selected = 0;
  while (std::getline(in, line)) {
    if (line.find("\"begin\"") != std::string::npos) {
      ++begins;
      CHECK(line.find("\"iteration\":2") != std::string::npos);
      CHECK(line.find("toy->toy") != std::string::npos);
    }
    if (line.find("\"step\"") != std::string::npos &&
        line.find("\"loss_total\"") != std::string::npos)
      ++steps;
    if (line.find("\"eval\"") != std::string::npos) ++evals;
    if (line.find("\"selected\"") != std::string::npos) ++selected;
  }
  CHECK(begins == 1);
  CHECK(steps > 0);
  CHECK(evals >= 2);
  CHECK(selected == 1);
  std::remove(path.c_str());
}
