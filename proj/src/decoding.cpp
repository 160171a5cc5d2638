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

#include "idda/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "idda/common.hpp"

namespace idda {

DecodeConfig DecodeConfig::from_config(const KvConfig& cfg) {
  DecodeConfig d;
  d.beam_size = cfg.get_int_or("decode.beam_size", d.beam_size);
  d.max_len = cfg.get_int_or("decode.max_len", d.max_len);
  if (d.beam_size < 1) throw ConfigError("decode.beam_size must be >= 1");
  if (d.max_len < 1) throw ConfigError("decode.max_len must be >= 1");
  return d;
}

namespace {

// Ranking order used both for pruning (on raw cumulative log-probability)
// and final selection (on normalized score): higher value first, then
// lexicographically smaller token sequence.
bool better(double va, const std::vector<std::int64_t>& ta, double vb,
            const std::vector<std::int64_t>& tb) {
  if (va != vb) return va > vb;
  return ta < tb;
}

}  // namespace

Hypothesis beam_search(const ModelParams& params,
                       const std::vector<std::int64_t>& source,
                       std::int64_t beam_size, std::int64_t max_len) {
  if (beam_size < 1) throw ConfigError("beam_search: beam_size must be >= 1");
  if (max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");
  // A prefix holds bos plus up to max_len generated tokens.
  if (max_len + 1 > params.config.max_positions)
    throw ConfigError("beam_search: max_len exceeds the model's max_positions");

  EncodedSource enc = encode_source(params, source);

  std::vector<Hypothesis> active{Hypothesis{}};
  std::vector<Hypothesis> completed;

  for (std::int64_t step = 0; step < max_len && !active.empty(); ++step) {
    // Expansions over the full alphabet, eos included, compete for the beam
    // slots; slot winners ending in eos retire to the completed pool. This
    // keeps beam_size=1 exactly equivalent to greedy decoding.
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& h : active) {
      std::vector<std::int64_t> prefix;
      prefix.reserve(h.tokens.size() + 1);
      prefix.push_back(Vocabulary::kBos);
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      Tensor lp = prefix_logprobs(params, enc, prefix);
      const std::int64_t last = lp.rows() - 1;
      for (std::int64_t tok = 0; tok < lp.cols(); ++tok) {
        if (tok == Vocabulary::kPad || tok == Vocabulary::kBos) continue;
        Hypothesis next = h;
        next.tokens.push_back(tok);
        next.logprob += lp.at(last, tok);
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Hypothesis& a, const Hypothesis& b) {
                return better(a.logprob, a.tokens, b.logprob, b.tokens);
              });
    if (static_cast<std::int64_t>(candidates.size()) > beam_size)
      candidates.resize(static_cast<std::size_t>(beam_size));
    active.clear();
    for (Hypothesis& c : candidates) {
      if (c.tokens.back() == Vocabulary::kEos)
        completed.push_back(std::move(c));
      else
        active.push_back(std::move(c));
    }
  }

  // Final choice: best length-normalized score over everything still alive,
  // finished or not (a truncated hypothesis may legitimately win).
  completed.insert(completed.end(), active.begin(), active.end());
  if (completed.empty()) throw InvariantError("beam_search: no hypotheses produced");
  const Hypothesis* best = &completed.front();
  for (const Hypothesis& h : completed)
    if (better(h.score(), h.tokens, best->score(), best->tokens)) best = &h;
  return *best;
}

BleuScore bleu(const std::vector<std::vector<std::string>>& hypotheses,
               const std::vector<std::vector<std::string>>& references) {
  if (hypotheses.empty()) throw InputError("bleu: empty hypothesis list");
  if (hypotheses.size() != references.size())
    throw InputError("bleu: hypothesis/reference counts differ");

  BleuScore out;
  std::array<std::int64_t, 4> matched{};
  std::array<std::int64_t, 4> total{};

  auto ngram_counts = [](const std::vector<std::string>& words, std::size_t n) {
    std::map<std::vector<std::string>, std::int64_t> counts;
    if (words.size() >= n)
      for (std::size_t i = 0; i + n <= words.size(); ++i)
        counts[std::vector<std::string>(words.begin() + i, words.begin() + i + n)]++;
    return counts;
  };

  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    out.hyp_length += static_cast<std::int64_t>(hypotheses[s].size());
    out.ref_length += static_cast<std::int64_t>(references[s].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      auto hyp_counts = ngram_counts(hypotheses[s], n);
      auto ref_counts = ngram_counts(references[s], n);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  out.brevity_penalty =
      out.hyp_length >= out.ref_length
          ? 1.0
          : std::exp(1.0 - static_cast<double>(out.ref_length) /
                               static_cast<double>(std::max<std::int64_t>(
                                   out.hyp_length, 1)));

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    out.precisions[n] =
        total[n] > 0 ? static_cast<double>(matched[n]) / static_cast<double>(total[n])
                     : 0.0;
    if (out.precisions[n] <= 0.0)
      zero = true;
    else
      log_sum += std::log(out.precisions[n]);
  }
  out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / 4.0) * 100.0;
  return out;
}

std::vector<std::vector<std::string>> translate_corpus(const ModelParams& params,
                                                       const Corpus& corpus,
                                                       const BpeModel& bpe,
                                                       const Vocabulary& vocab,
                                                       const DecodeConfig& cfg) {
  std::vector<std::vector<std::string>> out;
  out.reserve(corpus.pairs.size());
  for (const SentencePair& pair : corpus.pairs) {
    std::vector<std::int64_t> src = encode(pair.source, bpe, vocab);
    Hypothesis best = beam_search(params, src, cfg.beam_size, cfg.max_len);
    out.push_back(decode(best.tokens, vocab));
  }
  return out;
}

double eval_model(const Corpus& dev, const ModelParams& params, const BpeModel& bpe,
                  const Vocabulary& vocab, const DecodeConfig& cfg) {
  if (dev.empty()) throw InputError("eval_model: empty dev corpus");
  std::vector<std::vector<std::string>> hyps =
      translate_corpus(params, dev, bpe, vocab, cfg);
  std::vector<std::vector<std::string>> refs;
  refs.reserve(dev.pairs.size());
  for (const SentencePair& pair : dev.pairs) refs.push_back(pair.target);
  return bleu(hyps, refs).score;
}

}  // namespace idda
