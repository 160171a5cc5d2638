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

#ifndef IDDA_TOKENIZATION_HPP
#define IDDA_TOKENIZATION_HPP

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "idda/corpus.hpp"

namespace idda {

// End-of-word marker fused onto each word's final codepoint before merging;
// merges never cross word boundaries, so the marker only ever appears as a
// subword suffix and flags exactly the word-final subwords.
inline constexpr const char* kWordEnd = "</w>";

// Byte-pair-encoding model: an ordered list of merge rules over UTF-8
// codepoint symbols, applied top to bottom.
struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;
  std::vector<std::string> base_symbols;  // sorted unique inventory seen at learn time

  // Splits one word into subwords: codepoints + end marker, then all merges.
  std::vector<std::string> split_word(const std::string& word) const;

  // One merge rule per line, "left right", applied top to bottom.
  void save(const std::string& path) const;
  static BpeModel load(const std::string& path);
};

// Token <-> index bijection with fixed reserved entries.
class Vocabulary {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kBos = 1;
  static constexpr std::int64_t kEos = 2;
  static constexpr std::int64_t kUnk = 3;
  static constexpr std::int64_t kNumReserved = 4;

  Vocabulary();  // reserved tokens only

  std::int64_t size() const { return static_cast<std::int64_t>(tokens_.size()); }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  // Index of a token; unknown tokens map to kUnk.
  std::int64_t index_of(const std::string& token) const;
  const std::string& token_at(std::int64_t index) const;

  // Appends a non-reserved token; rejects duplicates and reserved names.
  void add(const std::string& token);

  // One token per line; line number == index; first four lines reserved.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int64_t> index_;
};

// Learns up to num_merges merge rules from the word frequencies of both
// sides of the corpus, most frequent pair first, ties broken lexicographically.
BpeModel learn_bpe(const Corpus& corpus, std::int64_t num_merges);

// Builds the joint vocabulary: reserved tokens plus the most frequent
// subwords of the BPE-split corpus, capped at `cap` total entries.
Vocabulary build_vocab(const Corpus& corpus, const BpeModel& bpe, std::int64_t cap);

// bos + subword indices + eos; out-of-vocabulary subwords become unk.
std::vector<std::int64_t> encode(const std::vector<std::string>& sentence, const BpeModel& bpe,
                                 const Vocabulary& vocab);

// Inverts encode for in-vocabulary content: strips reserved tokens, joins
// subwords, and splits words at end-of-word markers.
std::vector<std::string> decode(const std::vector<std::int64_t>& ids, const Vocabulary& vocab);

}  // namespace idda

#endif  // IDDA_TOKENIZATION_HPP
