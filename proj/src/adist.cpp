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

#include "idda/adist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "idda/common.hpp"

namespace idda {

namespace {

// Sparse normalized bag-of-subwords features over the source sentence.
struct Example {
  std::vector<std::pair<std::int64_t, double>> features;  // (vocab id, weight)
  double label = 0.0;                                     // +1 domain A, -1 domain B
};

Example featurize(const SentencePair& pair, const BpeModel& bpe,
                  const Vocabulary& vocab, double label) {
  std::vector<std::int64_t> ids = encode(pair.source, bpe, vocab);
  std::vector<std::int64_t> counts;
  std::vector<std::int64_t> seen;
  counts.assign(vocab.size(), 0);
  double total = 0.0;
  for (std::int64_t id : ids) {
    if (id == Vocabulary::kBos || id == Vocabulary::kEos || id == Vocabulary::kPad)
      continue;
    if (counts[id] == 0) seen.push_back(id);
    counts[id] += 1;
    total += 1.0;
  }
  Example ex;
  ex.label = label;
  if (total == 0.0) return ex;
  std::sort(seen.begin(), seen.end());
  for (std::int64_t id : seen)
    ex.features.emplace_back(id, static_cast<double>(counts[id]) / total);
  return ex;
}

double margin(const std::vector<double>& w, double bias, const Example& ex) {
  double s = bias;
  for (const auto& [id, x] : ex.features) s += w[static_cast<std::size_t>(id)] * x;
  return s;
}

// Stratified 80/20 split of one corpus's indices.
void split_indices(std::size_t n, Rng& rng, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& heldout) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  const std::size_t cut = (n * 8) / 10;
  train.insert(train.end(), idx.begin(), idx.begin() + cut);
  heldout.insert(heldout.end(), idx.begin() + cut, idx.end());
}

}  // namespace

ADistanceResult proxy_a_distance(const Corpus& corpus_a, const Corpus& corpus_b,
                                 const BpeModel& bpe, const Vocabulary& vocab,
                                 std::uint64_t rng_seed) {
  if (corpus_a.size() < 20 || corpus_b.size() < 20)
    throw InputError("proxy_a_distance: each corpus needs at least 20 sentences");

  std::vector<Example> train, heldout;
  auto add_side = [&](const Corpus& c, double label, const char* split_label) {
    Rng rng(derive_seed(rng_seed, std::string("adist-split-") + split_label));
    std::vector<std::size_t> tr, ho;
    split_indices(c.pairs.size(), rng, tr, ho);
    for (std::size_t i : tr) train.push_back(featurize(c.pairs[i], bpe, vocab, label));
    for (std::size_t i : ho) heldout.push_back(featurize(c.pairs[i], bpe, vocab, label));
  };
  add_side(corpus_a, +1.0, "a");
  add_side(corpus_b, -1.0, "b");

  // Hinge-loss linear classifier by subgradient descent with L2 decay.
  std::vector<double> w(static_cast<std::size_t>(vocab.size()), 0.0);
  double bias = 0.0;
  const double lr = 0.5;
  const double reg = 1e-4;
  const int epochs = 60;
  Rng order_rng(derive_seed(rng_seed, "adist-sgd"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    order_rng.shuffle(order);
    for (std::size_t i : order) {
      const Example& ex = train[i];
      const double decay = 1.0 - lr * reg;
      for (double& wi : w) wi *= decay;
      if (ex.label * margin(w, bias, ex) < 1.0) {
        for (const auto& [id, x] : ex.features)
          w[static_cast<std::size_t>(id)] += lr * ex.label * x;
        bias += lr * ex.label;
      }
    }
  }

  std::int64_t wrong = 0;
  for (const Example& ex : heldout) {
    const double pred = margin(w, bias, ex) >= 0.0 ? 1.0 : -1.0;
    if (pred != ex.label) ++wrong;
  }
  ADistanceResult r;
  r.epsilon = static_cast<double>(wrong) / static_cast<double>(heldout.size());
  r.epsilon = std::min(0.5, std::max(0.0, r.epsilon));
  r.a_distance = 2.0 * (1.0 - 2.0 * r.epsilon);
  return r;
}

std::vector<DomainDescriptor> transfer_order(const std::vector<DomainDescriptor>& outs) {
  std::vector<DomainDescriptor> ordered = outs;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const DomainDescriptor& x, const DomainDescriptor& y) {
                     return x.a_distance > y.a_distance;
                   });
  return ordered;
}

}  // namespace idda
