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

#ifndef IDDA_SYNTH_HPP
#define IDDA_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "idda/config.hpp"
#include "idda/corpus.hpp"

namespace idda {

// Synthetic translation task. The source language is sequences of
// consonant-vowel syllables; the translation rule maps each syllable to a
// vowel-consonant syllable through a permutation drawn from rule_seed, word
// for word and position for position. Every domain sharing rule_seed shares
// the full translation rule ("domain-shared knowledge"); domains differ only
// in which words they use ("domain difference").
//
// Word inventories come from one seeded shuffle of all two-syllable words
// (the universe). The first `overlap * vocab_size` words of a domain are a
// prefix of the universe's shared region — identical across domains — and
// the rest come from a per-domain slice of the exclusive region, disjoint
// across slots (and from the shared region) by construction.
struct SynthSpec {
  std::string domain_tag;
  std::uint64_t rule_seed = 1;
  std::int64_t vocab_size = 120;  // words in this domain's inventory
  double overlap = 1.0;           // fraction of the inventory that is shared
  std::int64_t exclusive_slot = 0;
  std::vector<std::string> style_markers;  // prepended to both sides, cycled
  std::int64_t num_pairs = 1000;
  std::int64_t min_words = 3;  // content words per sentence
  std::int64_t max_words = 8;

  // Reads `domain_tag`, `rule_seed`, `vocab_size`, `overlap`,
  // `exclusive_slot`, `style_markers`, `num_pairs`, `min_words`, `max_words`
  // from keys under `prefix.` (or top-level keys when prefix is empty).
  static SynthSpec from_config(const KvConfig& cfg, const std::string& prefix);

  void validate() const;
};

// The translation rule: maps every consonant-vowel-composed word through the
// syllable permutation; any other word (style markers) maps to itself.
std::vector<std::string> apply_rule(std::uint64_t rule_seed,
                                    const std::vector<std::string>& words);

// This domain's word inventory, deterministic in the spec alone.
std::vector<std::string> domain_inventory(const SynthSpec& spec);

// Draws num_pairs sentences from the inventory and maps them with the rule.
Corpus synth_domain_corpus(const SynthSpec& spec, std::uint64_t rng_seed,
                           CorpusRole role = CorpusRole::kTrain);

}  // namespace idda

#endif  // IDDA_SYNTH_HPP
