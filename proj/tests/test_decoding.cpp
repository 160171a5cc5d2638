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
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "idda/common.hpp"
#include "idda/decoding.hpp"
#include "idda/model.hpp"
#include "idda/tokenization.hpp"

using namespace idda;

namespace {

ModelConfig tiny_config(std::int64_t vocab = 7) {
  ModelConfig c;
  c.embed_dim = 4;
  c.hidden_dim = 6;
  c.num_heads = 2;
  c.num_layers = 1;
  c.vocab_size = vocab;
  c.max_positions = 16;
  return c;
}

std::vector<std::string> words(std::initializer_list<const char*> ws) {
  return std::vector<std::string>(ws.begin(), ws.end());
}

// Greedy reference decoder written independently of beam_search.
Hypothesis greedy_decode(const ModelParams& p, const std::vector<std::int64_t>& src,
                         std::int64_t max_len) {
  EncodedSource enc = encode_source(p, src);
  Hypothesis h;
  for (std::int64_t step = 0; step < max_len; ++step) {
    std::vector<std::int64_t> prefix{Vocabulary::kBos};
    prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
    Tensor lp = prefix_logprobs(p, enc, prefix);
    const std::int64_t row = lp.rows() - 1;
    std::int64_t best = -1;
    for (std::int64_t tok = 0; tok < lp.cols(); ++tok) {
      if (tok == Vocabulary::kPad || tok == Vocabulary::kBos) continue;
      if (best < 0 || lp.at(row, tok) > lp.at(row, best)) best = tok;
    }
    h.tokens.push_back(best);
    h.logprob += lp.at(row, best);
    if (best == Vocabulary::kEos) break;
  }
  return h;
}

}  // namespace

TEST_CASE("beam size 1 equals greedy decoding") {
  const std::vector<std::int64_t> src{1, 4, 5, 6, 2};
  for (std::uint64_t seed : {3u, 17u, 91u, 404u}) {
    ModelParams p = init_model(tiny_config(), seed);
    Hypothesis g = greedy_decode(p, src, 8);
    Hypothesis b = beam_search(p, src, 1, 8);
    CHECK(b.tokens == g.tokens);
    CHECK(b.logprob == doctest::Approx(g.logprob).epsilon(1e-12));
  }
}

TEST_CASE("reported log-probability survives re-scoring") {
  ModelParams p = init_model(tiny_config(), 12);
  const std::vector<std::int64_t> src{1, 5, 4, 2};
  Hypothesis h = beam_search(p, src, 4, 8);
  REQUIRE(!h.tokens.empty());

  EncodedSource enc = encode_source(p, src);
  std::vector<std::int64_t> prefix{Vocabulary::kBos};
  prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
  // Row t scores prefix[t+1]; the final row is only needed if it scored a token.
  Tensor lp = prefix_logprobs(p, enc, prefix);
  double sum = 0.0;
  for (std::size_t t = 0; t < h.tokens.size(); ++t)
    sum += lp.at(static_cast<std::int64_t>(t), h.tokens[t]);
  CHECK(h.logprob == doctest::Approx(sum).epsilon(1e-9));
}

TEST_CASE("large beam matches exhaustive enumeration") {
  // Vocabulary 5 leaves {eos, unk, 4} as the expansion alphabet. With
  // max_len 3 and beam 125 nothing is ever pruned, so the result must be the
  // global optimum over all sequences: eos-terminated ones of length <= 3
  // plus unfinished ones of exactly length 3.
  const std::int64_t max_len = 3;
  const std::vector<std::int64_t> alphabet{3, 4};  // non-eos
  const std::vector<std::int64_t> src{1, 4, 2};

  for (std::uint64_t seed : {1u, 2u, 5u, 8u, 13u}) {
    ModelParams p = init_model(tiny_config(5), seed);
    EncodedSource enc = encode_source(p, src);

    auto score_seq = [&](const std::vector<std::int64_t>& toks) {
      std::vector<std::int64_t> prefix{Vocabulary::kBos};
      prefix.insert(prefix.end(), toks.begin(), toks.end());
      Tensor lp = prefix_logprobs(p, enc, prefix);
      double sum = 0.0;
      for (std::size_t t = 0; t < toks.size(); ++t)
        sum += lp.at(static_cast<std::int64_t>(t), toks[t]);
      return sum;
    };

    std::vector<std::vector<std::int64_t>> prefixes{{}};
    std::vector<std::vector<std::int64_t>> finished, unfinished;
    for (std::int64_t len = 1; len <= max_len; ++len) {
      std::vector<std::vector<std::int64_t>> next;
      for (const auto& pre : prefixes) {
        std::vector<std::int64_t> done = pre;
        done.push_back(Vocabulary::kEos);
        finished.push_back(done);
        for (std::int64_t a : alphabet) {
          std::vector<std::int64_t> ext = pre;
          ext.push_back(a);
          if (len == max_len)
            unfinished.push_back(ext);
          else
            next.push_back(ext);
        }
      }
      prefixes = std::move(next);
    }

    std::vector<std::vector<std::int64_t>> all = finished;
    all.insert(all.end(), unfinished.begin(), unfinished.end());
    std::vector<std::int64_t> want_toks;
    double want_score = -1e300;
    for (const auto& toks : all) {
      const double s = score_seq(toks) / static_cast<double>(toks.size());
      if (s > want_score || (s == want_score && toks < want_toks)) {
        want_score = s;
        want_toks = toks;
      }
    }
    Hypothesis got = beam_search(p, src, 125, max_len);
    CHECK(got.tokens == want_toks);
    CHECK(got.score() == doctest::Approx(want_score).epsilon(1e-12));
  }
}

TEST_CASE("beam widening never lowers the returned score") {
  const std::vector<std::int64_t> src{1, 6, 5, 2};
  for (std::uint64_t seed : {7u, 21u, 33u, 48u}) {
    ModelParams p = init_model(tiny_config(), seed);
    double prev = -1e300;
    for (std::int64_t beam = 1; beam <= 5; ++beam) {
      const double s = beam_search(p, src, beam, 6).score();
      CHECK(s >= prev - 1e-12);
      prev = s;
    }
  }
}

TEST_CASE("bleu of identical corpora is 100") {
  std::vector<std::vector<std::string>> text{words({"a", "b", "c", "d", "e"}),
                                             words({"x", "y", "z", "w"})};
  BleuScore s = bleu(text, text);
  CHECK(s.score == doctest::Approx(100.0).epsilon(1e-9));
  for (double p : s.precisions) CHECK(p == doctest::Approx(1.0));
  CHECK(s.brevity_penalty == 1.0);
}

TEST_CASE("any zero precision zeroes the score") {
  // Shared unigrams through trigrams but no 4-gram match.
  std::vector<std::vector<std::string>> hyp{words({"a", "b", "c", "x", "d"})};
  std::vector<std::vector<std::string>> ref{words({"a", "b", "c", "d", "e"})};
  BleuScore s = bleu(hyp, ref);
  CHECK(s.precisions[0] > 0.0);
  CHECK(s.precisions[3] == 0.0);
  CHECK(s.score == 0.0);
}

TEST_CASE("corpus bleu matches a hand-worked case") {
  // Sentence 1 is exact; sentence 2 swaps one word ("z" for "c").
  //   p1 = (4+4)/(4+5) = 8/9      p2 = (3+2)/(3+4) = 5/7
  //   p3 = (2+0)/(2+3) = 2/5      p4 = (1+0)/(1+2) = 1/3
  //   lengths equal, brevity 1; score = 100*(8/9 * 5/7 * 2/5 * 1/3)^(1/4).
  std::vector<std::vector<std::string>> hyp{words({"a", "b", "c", "d"}),
                                            words({"a", "b", "z", "d", "e"})};
  std::vector<std::vector<std::string>> ref{words({"a", "b", "c", "d"}),
                                            words({"a", "b", "c", "d", "e"})};
  BleuScore s = bleu(hyp, ref);
  CHECK(s.precisions[0] == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(s.precisions[1] == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
  CHECK(s.precisions[2] == doctest::Approx(2.0 / 5.0).epsilon(1e-12));
  CHECK(s.precisions[3] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(s.brevity_penalty == 1.0);
  const double expected = 100.0 * std::pow(16.0 / 189.0, 0.25);
  CHECK(s.score == doctest::Approx(expected).epsilon(1e-9));
  CHECK(s.score == doctest::Approx(53.936).epsilon(1e-4));
}

TEST_CASE("clipping caps repeated words at the reference count") {
  // Classic over-generation: "the" appears twice in the reference, so only
  // two of seven hypothesis tokens count; p1 = 2/7.
  std::vector<std::vector<std::string>> hyp{
      words({"the", "the", "the", "the", "the", "the", "the"})};
  std::vector<std::vector<std::string>> ref{
      words({"the", "cat", "is", "on", "the", "mat"})};
  BleuScore s = bleu(hyp, ref);
  CHECK(s.precisions[0] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
  CHECK(s.score == 0.0);  // no bigram match
}

TEST_CASE("brevity penalty applies exactly when the hypothesis is shorter") {
  std::vector<std::vector<std::string>> hyp{words({"a", "b", "c", "d"})};
  std::vector<std::vector<std::string>> ref{words({"a", "b", "c", "d", "e"})};
  BleuScore s = bleu(hyp, ref);
  for (double p : s.precisions) CHECK(p == doctest::Approx(1.0));
  CHECK(s.brevity_penalty == doctest::Approx(std::exp(1.0 - 5.0 / 4.0)).epsilon(1e-12));
  CHECK(s.score == doctest::Approx(100.0 * std::exp(-0.25)).epsilon(1e-9));
}

TEST_CASE("bleu rejects bad input") {
  CHECK_THROWS_AS(bleu({}, {}), InputError);
  CHECK_THROWS_AS(bleu({words({"a"})}, {}), InputError);
}

TEST_CASE("independent recount of corpus bleu on random word soup") {
  // Second implementation of clipped corpus BLEU using sorted n-gram lists
  // instead of maps; both must agree on awkward inputs.
  Rng rng(99);
  const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f"};
  std::vector<std::vector<std::string>> hyp, ref;
  for (int s = 0; s < 6; ++s) {
    std::vector<std::string> h, r;
    const int hl = 4 + static_cast<int>(rng.next_below(5));
    const int rl = 4 + static_cast<int>(rng.next_below(5));
    for (int i = 0; i < hl; ++i) h.push_back(pool[rng.next_below(pool.size())]);
    for (int i = 0; i < rl; ++i) r.push_back(pool[rng.next_below(pool.size())]);
    hyp.push_back(h);
    ref.push_back(r);
  }

  auto grams = [](const std::vector<std::string>& w, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i + n <= w.size(); ++i) {
      std::string g;
      for (std::size_t j = 0; j < n; ++j) g += w[i + j] + "\x1f";
      out.push_back(g);
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  double logsum = 0.0;
  bool zero = false;
  std::int64_t hyp_len = 0, ref_len = 0;
  std::array<double, 4> precisions{};
  for (std::size_t n = 1; n <= 4; ++n) {
    std::int64_t match = 0, total = 0;
    for (std::size_t s = 0; s < hyp.size(); ++s) {
      auto hg = grams(hyp[s], n);
      auto rg = grams(ref[s], n);
      total += static_cast<std::int64_t>(hg.size());
      // Sorted-list intersection with multiplicity == clipped matches.
      std::vector<std::string> inter;
      std::set_intersection(hg.begin(), hg.end(), rg.begin(), rg.end(),
                            std::back_inserter(inter));
      match += static_cast<std::int64_t>(inter.size());
      if (n == 1) {
        hyp_len += static_cast<std::int64_t>(hyp[s].size());
        ref_len += static_cast<std::int64_t>(ref[s].size());
      }
    }
    precisions[n - 1] = total > 0 ? static_cast<double>(match) / total : 0.0;
    if (precisions[n - 1] <= 0.0)
      zero = true;
    else
      logsum += std::log(precisions[n - 1]);
  }
  const double bp = hyp_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  const double want = zero ? 0.0 : bp * std::exp(logsum / 4.0) * 100.0;

  BleuScore got = bleu(hyp, ref);
  CHECK(got.score == doctest::Approx(want).epsilon(1e-9));
  for (int n = 0; n < 4; ++n)
    CHECK(got.precisions[n] == doctest::Approx(precisions[n]).epsilon(1e-12));
  CHECK(got.score >= 0.0);
  CHECK(got.score <= 100.0);
  CHECK(got.brevity_penalty > 0.0);
  CHECK(got.brevity_penalty <= 1.0);
}

TEST_CASE("eval_model composes decode and bleu deterministically") {
  // Single-letter words; an empty BPE model splits each into one marked
  // symbol, so the vocabulary is just the marked letters.
  Corpus dev;
  dev.domain_tag = "toy";
  dev.role = CorpusRole::kDev;
  dev.pairs = {{words({"a", "b"}), words({"b", "a", "c", "a", "b"})},
               {words({"c"}), words({"c", "c", "a", "b"})},
               {words({"a", "c", "b"}), words({"a", "b", "c", "d"})}};

  BpeModel bpe;  // zero merges
  Vocabulary vocab;
  for (const char* w : {"a</w>", "b</w>", "c</w>", "d</w>", "e</w>"}) vocab.add(w);
  REQUIRE(vocab.size() == 9);

  ModelParams p = init_model(tiny_config(9), 23);
  DecodeConfig cfg;
  cfg.beam_size = 2;
  cfg.max_len = 5;

  const double s1 = eval_model(dev, p, bpe, vocab, cfg);
  const double s2 = eval_model(dev, p, bpe, vocab, cfg);
  CHECK(s1 == s2);

  std::vector<std::vector<std::string>> hyps = translate_corpus(p, dev, bpe, vocab, cfg);
  std::vector<std::vector<std::string>> refs;
  for (const auto& pair : dev.pairs) refs.push_back(pair.target);
  CHECK(s1 == bleu(hyps, refs).score);

  // Harness self-test: scoring the references against themselves gives 100.
  CHECK(bleu(refs, refs).score == doctest::Approx(100.0).epsilon(1e-9));

  Corpus empty;
  CHECK_THROWS_AS(eval_model(empty, p, bpe, vocab, cfg), InputError);
}
