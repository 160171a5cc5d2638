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

#include "idda/synth.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

#include "idda/common.hpp"

namespace idda {

namespace {

const std::string kConsonants = "ptkbdgmnsl";
const std::string kVowels = "aeiou";

// All consonant-vowel syllables in fixed enumeration order.
std::vector<std::string> source_syllables() {
  std::vector<std::string> out;
  for (char c : kConsonants)
    for (char v : kVowels) out.push_back(std::string{c, v});
  return out;
}

// The matching vowel-consonant syllables, permuted by the rule seed.
std::vector<std::string> target_syllables(std::uint64_t rule_seed) {
  std::vector<std::string> out;
  for (char c : kConsonants)
    for (char v : kVowels) out.push_back(std::string{v, c});
  Rng rng(derive_seed(rule_seed, "rule-perm"));
  rng.shuffle(out);
  return out;
}

bool is_consonant(char c) { return kConsonants.find(c) != std::string::npos; }
bool is_vowel(char c) { return kVowels.find(c) != std::string::npos; }

// A word participates in the rule iff it is a non-empty sequence of CV pairs.
bool parses_as_syllables(const std::string& word) {
  if (word.empty() || word.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < word.size(); i += 2)
    if (!is_consonant(word[i]) || !is_vowel(word[i + 1])) return false;
  return true;
}

// The universe: every two-syllable word, in one seeded shuffle shared by all
// domains with the same rule. Region [0, kSharedRegion) is reserved for
// shared prefixes; slot s owns [kSharedRegion + s*kSlotRegion, ...).
constexpr std::int64_t kSharedRegion = 500;
constexpr std::int64_t kSlotRegion = 500;

std::vector<std::string> word_universe(std::uint64_t rule_seed) {
  std::vector<std::string> syll = source_syllables();
  std::vector<std::string> words;
  words.reserve(syll.size() * syll.size());
  for (const std::string& a : syll)
    for (const std::string& b : syll) words.push_back(a + b);
  Rng rng(derive_seed(rule_seed, "word-universe"));
  rng.shuffle(words);
  return words;
}

}  // namespace

SynthSpec SynthSpec::from_config(const KvConfig& cfg, const std::string& prefix) {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  SynthSpec spec;
  spec.domain_tag = cfg.get_string_or(p + "domain_tag", prefix.empty() ? "synth" : prefix);
  spec.rule_seed = static_cast<std::uint64_t>(cfg.get_int_or(p + "rule_seed", 1));
  spec.vocab_size = cfg.get_int_or(p + "vocab_size", 120);
  spec.overlap = cfg.get_double_or(p + "overlap", 1.0);
  spec.exclusive_slot = cfg.get_int_or(p + "exclusive_slot", 0);
  spec.style_markers = cfg.get_list_or(p + "style_markers");
  spec.num_pairs = cfg.get_int_or(p + "num_pairs", 1000);
  spec.min_words = cfg.get_int_or(p + "min_words", 3);
  spec.max_words = cfg.get_int_or(p + "max_words", 8);
  spec.validate();
  return spec;
}

void SynthSpec::validate() const {
  if (domain_tag.empty()) throw ConfigError("synth spec: empty domain_tag");
  if (vocab_size < 1) throw ConfigError("synth spec: vocab_size must be >= 1");
  if (vocab_size > kSharedRegion)
    throw ConfigError("synth spec: vocab_size must be <= " + std::to_string(kSharedRegion));
  if (overlap < 0.0 || overlap > 1.0)
    throw ConfigError("synth spec: overlap must lie in [0, 1]");
  if (exclusive_slot < 0) throw ConfigError("synth spec: exclusive_slot must be >= 0");
  if (num_pairs < 0) throw ConfigError("synth spec: num_pairs must be >= 0");
  if (min_words < 1 || max_words < min_words)
    throw ConfigError("synth spec: need 1 <= min_words <= max_words");
  for (const std::string& m : style_markers)
    if (parses_as_syllables(m))
      throw ConfigError("synth spec: style marker `" + m +
                        "` collides with the syllable language");
}

std::vector<std::string> apply_rule(std::uint64_t rule_seed,
                                    const std::vector<std::string>& words) {
  const std::vector<std::string> src = source_syllables();
  const std::vector<std::string> tgt = target_syllables(rule_seed);
  std::unordered_map<std::string, std::string> map;
  for (std::size_t i = 0; i < src.size(); ++i) map[src[i]] = tgt[i];

  std::vector<std::string> out;
  out.reserve(words.size());
  for (const std::string& w : words) {
    if (!parses_as_syllables(w)) {
      out.push_back(w);
      continue;
    }
    std::string t;
    for (std::size_t i = 0; i < w.size(); i += 2) t += map[w.substr(i, 2)];
    out.push_back(t);
  }
  return out;
}

std::vector<std::string> domain_inventory(const SynthSpec& spec) {
  spec.validate();
  const std::vector<std::string> universe = word_universe(spec.rule_seed);
  const std::int64_t shared = std::llround(spec.overlap * static_cast<double>(spec.vocab_size));
  const std::int64_t exclusive = spec.vocab_size - shared;
  const std::int64_t slot_base = kSharedRegion + spec.exclusive_slot * kSlotRegion;
  if (slot_base + exclusive > static_cast<std::int64_t>(universe.size()))
    throw ConfigError("synth spec: exclusive_slot " + std::to_string(spec.exclusive_slot) +
                      " exceeds the word universe");
  std::vector<std::string> inventory;
  inventory.reserve(spec.vocab_size);
  for (std::int64_t i = 0; i < shared; ++i) inventory.push_back(universe[i]);
  for (std::int64_t i = 0; i < exclusive; ++i) inventory.push_back(universe[slot_base + i]);
  return inventory;
}

Corpus synth_domain_corpus(const SynthSpec& spec, std::uint64_t rng_seed, CorpusRole role) {
  const std::vector<std::string> inventory = domain_inventory(spec);
  Rng rng(derive_seed(rng_seed, "synth-" + spec.domain_tag));
  Corpus corpus;
  corpus.domain_tag = spec.domain_tag;
  corpus.role = role;
  corpus.pairs.reserve(spec.num_pairs);
  for (std::int64_t n = 0; n < spec.num_pairs; ++n) {
    const std::int64_t len =
        spec.min_words + static_cast<std::int64_t>(rng.next_below(
                             static_cast<std::size_t>(spec.max_words - spec.min_words + 1)));
    SentencePair pair;
    if (!spec.style_markers.empty())
      pair.source.push_back(spec.style_markers[n % spec.style_markers.size()]);
    for (std::int64_t i = 0; i < len; ++i)
      pair.source.push_back(inventory[rng.next_below(inventory.size())]);
    pair.target = apply_rule(spec.rule_seed, pair.source);
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

}  // namespace idda
