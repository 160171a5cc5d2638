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

#ifndef IDDA_BATCH_HPP
#define IDDA_BATCH_HPP

#include <cstdint>
#include <vector>

#include "idda/corpus.hpp"
#include "idda/tokenization.hpp"

namespace idda {

// One padded training batch of encoded sentence pairs. Index matrices are
// row-major [batch_size, *_len] with pad (= 0) only at row tails; every
// encoded sequence includes its bos/eos wrapper.
struct Batch {
  std::int64_t batch_size = 0;
  std::int64_t src_len = 0;  // padded width of the source matrix
  std::int64_t tgt_len = 0;  // padded width of the target matrix
  std::vector<std::int64_t> source;    // [batch_size * src_len]
  std::vector<std::int64_t> target;    // [batch_size * tgt_len]
  std::vector<std::int64_t> src_lens;  // true per-sentence lengths
  std::vector<std::int64_t> tgt_lens;
  std::int64_t token_count = 0;  // total true source+target tokens (budget unit)

  std::int64_t src_at(std::int64_t row, std::int64_t col) const {
    return source[row * src_len + col];
  }
  std::int64_t tgt_at(std::int64_t row, std::int64_t col) const {
    return target[row * tgt_len + col];
  }
};

// Encodes one pair into a single-sentence batch (decoding/evaluation paths).
Batch encode_pair_batch(const std::vector<std::string>& source_sentence,
                        const std::vector<std::string>& target_sentence, const BpeModel& bpe,
                        const Vocabulary& vocab);

// Groups the corpus into similar-length batches of at most token_budget
// total source+target tokens each, then shuffles the batch order by seed.
// Every pair lands in exactly one batch.
std::vector<Batch> make_batches(const Corpus& corpus, const BpeModel& bpe,
                                const Vocabulary& vocab, std::int64_t token_budget,
                                std::uint64_t rng_seed);

}  // namespace idda

#endif  // IDDA_BATCH_HPP
