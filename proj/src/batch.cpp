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

#include "idda/batch.hpp"

#include <algorithm>
#include <numeric>

#include "idda/common.hpp"

namespace idda {

namespace {

Batch assemble(const std::vector<std::vector<std::int64_t>>& src,
               const std::vector<std::vector<std::int64_t>>& tgt) {
  Batch b;
  b.batch_size = static_cast<std::int64_t>(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    b.src_len = std::max(b.src_len, static_cast<std::int64_t>(src[i].size()));
    b.tgt_len = std::max(b.tgt_len, static_cast<std::int64_t>(tgt[i].size()));
  }
  b.source.assign(b.batch_size * b.src_len, Vocabulary::kPad);
  b.target.assign(b.batch_size * b.tgt_len, Vocabulary::kPad);
  for (std::int64_t i = 0; i < b.batch_size; ++i) {
    b.src_lens.push_back(static_cast<std::int64_t>(src[i].size()));
    b.tgt_lens.push_back(static_cast<std::int64_t>(tgt[i].size()));
    b.token_count += b.src_lens.back() + b.tgt_lens.back();
    std::copy(src[i].begin(), src[i].end(), b.source.begin() + i * b.src_len);
    std::copy(tgt[i].begin(), tgt[i].end(), b.target.begin() + i * b.tgt_len);
  }
  return b;
}

}  // namespace

Batch encode_pair_batch(const std::vector<std::string>& source_sentence,
                        const std::vector<std::string>& target_sentence, const BpeModel& bpe,
                        const Vocabulary& vocab) {
  return assemble({encode(source_sentence, bpe, vocab)},
                  {encode(target_sentence, bpe, vocab)});
}

std::vector<Batch> make_batches(const Corpus& corpus, const BpeModel& bpe,
                                const Vocabulary& vocab, std::int64_t token_budget,
                                std::uint64_t rng_seed) {
  if (token_budget < 1) throw ConfigError("make_batches: token_budget must be >= 1");

  std::vector<std::vector<std::int64_t>> src, tgt;
  src.reserve(corpus.size());
  tgt.reserve(corpus.size());
  for (const SentencePair& p : corpus.pairs) {
    src.push_back(encode(p.source, bpe, vocab));
    tgt.push_back(encode(p.target, bpe, vocab));
    const std::int64_t tokens =
        static_cast<std::int64_t>(src.back().size() + tgt.back().size());
    if (tokens > token_budget)
      throw ConfigError("make_batches: pair of " + std::to_string(tokens) +
                        " tokens exceeds token_budget " + std::to_string(token_budget));
  }

  // Sort by approximate length so batchmates pad little; index tie-break
  // keeps the order deterministic.
  std::vector<std::size_t> order(src.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const std::size_t la = src[a].size() + tgt[a].size();
    const std::size_t lb = src[b].size() + tgt[b].size();
    if (la != lb) return la < lb;
    return a < b;
  });

  std::vector<Batch> batches;
  std::vector<std::vector<std::int64_t>> bucket_src, bucket_tgt;
  std::int64_t bucket_tokens = 0;
  for (std::size_t idx : order) {
    const std::int64_t tokens = static_cast<std::int64_t>(src[idx].size() + tgt[idx].size());
    if (!bucket_src.empty() && bucket_tokens + tokens > token_budget) {
      batches.push_back(assemble(bucket_src, bucket_tgt));
      bucket_src.clear();
      bucket_tgt.clear();
      bucket_tokens = 0;
    }
    bucket_src.push_back(src[idx]);
    bucket_tgt.push_back(tgt[idx]);
    bucket_tokens += tokens;
  }
  if (!bucket_src.empty()) batches.push_back(assemble(bucket_src, bucket_tgt));

  Rng rng(derive_seed(rng_seed, "batch-order"));
  rng.shuffle(batches);
  return batches;
}

}  // namespace idda
