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

#ifndef IDDA_DECODING_HPP
#define IDDA_DECODING_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "idda/corpus.hpp"
#include "idda/model.hpp"
#include "idda/tokenization.hpp"

namespace idda {

// A decoded target-side candidate. `tokens` excludes bos and includes the
// closing eos when the hypothesis completed before the length cap. `logprob`
// is the raw cumulative log-probability; ranking uses score() (simple
// length-normalized average).
struct Hypothesis {
  std::vector<std::int64_t> tokens;
  double logprob = 0.0;

  double score() const {
    return logprob / static_cast<double>(tokens.empty() ? 1 : tokens.size());
  }
};

struct DecodeConfig {
  std::int64_t beam_size = 4;
  std::int64_t max_len = 32;  // generated tokens, eos included

  static DecodeConfig from_config(const KvConfig& cfg);
};

// Beam search over the expansion alphabet (vocabulary minus pad and bos).
// Hypotheses complete on eos and retire from the beam; the returned
// hypothesis maximizes the length-normalized score over everything explored,
// completed or truncated at max_len. Ties break lexicographically on token
// indices.
Hypothesis beam_search(const ModelParams& params,
                       const std::vector<std::int64_t>& source,
                       std::int64_t beam_size, std::int64_t max_len);

// Corpus-level BLEU with clipped modified n-gram precisions (n = 1..4),
// geometric mean, and brevity penalty; no smoothing, so a zero precision at
// any order zeroes the score.
struct BleuScore {
  double score = 0.0;  // in [0,100]
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
  std::int64_t hyp_length = 0;
  std::int64_t ref_length = 0;
};

BleuScore bleu(const std::vector<std::vector<std::string>>& hypotheses,
               const std::vector<std::vector<std::string>>& references);

// Decodes every source sentence and returns the word sequences (subwords
// re-joined).
std::vector<std::vector<std::string>> translate_corpus(const ModelParams& params,
                                                       const Corpus& corpus,
                                                       const BpeModel& bpe,
                                                       const Vocabulary& vocab,
                                                       const DecodeConfig& cfg);

// Algorithm 1's EvalModel: decode the dev set and score corpus BLEU against
// its references. Deterministic for fixed inputs.
double eval_model(const Corpus& dev, const ModelParams& params, const BpeModel& bpe,
                  const Vocabulary& vocab, const DecodeConfig& cfg);

}  // namespace idda

#endif  // IDDA_DECODING_HPP
