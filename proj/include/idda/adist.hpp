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

#ifndef IDDA_ADIST_HPP
#define IDDA_ADIST_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "idda/corpus.hpp"
#include "idda/tokenization.hpp"

namespace idda {

// Proxy A-distance between two corpora: train a linear bag-of-subwords
// hinge-loss classifier to tell their source sentences apart on a stratified
// 80% split, measure the 20% held-out error rate epsilon (clamped to
// [0, 0.5]), and report a_distance = 2*(1 - 2*epsilon). 0 means the domains
// are indistinguishable, 2 means perfectly separable.
struct ADistanceResult {
  double a_distance = 0.0;
  double epsilon = 0.5;
};

ADistanceResult proxy_a_distance(const Corpus& corpus_a, const Corpus& corpus_b,
                                 const BpeModel& bpe, const Vocabulary& vocab,
                                 std::uint64_t rng_seed);

// One out-of-domain corpus annotated with its distance to the in-domain.
struct DomainDescriptor {
  std::string domain_tag;
  const Corpus* train = nullptr;
  const Corpus* dev = nullptr;
  double a_distance = 0.0;
  double epsilon = 0.5;
};

// Most distant domain first (its knowledge is transferred earliest, so the
// most relevant domain is transferred last and best preserved). Ties keep
// input order.
std::vector<DomainDescriptor> transfer_order(const std::vector<DomainDescriptor>& outs);

}  // namespace idda

#endif  // IDDA_ADIST_HPP
