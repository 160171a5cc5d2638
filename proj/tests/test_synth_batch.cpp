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
#include <map>
#include <set>
#include <string>
#include <vector>

#include "idda/batch.hpp"
#include "idda/common.hpp"
#include "idda/synth.hpp"
#include "idda/tokenization.hpp"

using namespace idda;

namespace {

SynthSpec base_spec(const std::string& tag, double overlap, std::int64_t slot) {
  SynthSpec spec;
  spec.domain_tag = tag;
  spec.rule_seed = 7;
  spec.vocab_size = 60;
  spec.overlap = overlap;
  spec.exclusive_slot = slot;
  spec.num_pairs = 40;
  spec.min_words = 2;
  spec.max_words = 5;
  return spec;
}

}  // namespace

TEST_CASE("overlap 1.0 gives identical inventories, 0.0 gives disjoint ones") {
  auto inv_a = domain_inventory(base_spec("a", 1.0, 0));
  auto inv_b = domain_inventory(base_spec("b", 1.0, 1));
  CHECK(inv_a == inv_b);

  auto inv_c = domain_inventory(base_spec("c", 0.0, 0));
  auto inv_d = domain_inventory(base_spec("d", 0.0, 1));
  std::set<std::string> sc(inv_c.begin(), inv_c.end());
  std::set<std::string> sd(inv_d.begin(), inv_d.end());
  REQUIRE(sc.size() == 60);
  REQUIRE(sd.size() == 60);
  for (const std::string& w : sc) CHECK(sd.count(w) == 0);
}

TEST_CASE("partial overlap shares exactly the expected word count") {
  auto ref = domain_inventory(base_spec("ref", 1.0, 0));
  auto half = domain_inventory(base_spec("half", 0.5, 1));
  std::set<std::string> sref(ref.begin(), ref.end());
  std::size_t shared = 0;
  for (const std::string& w : half)
    if (sref.count(w)) ++shared;
  CHECK(shared == 30);  // llround(0.5 * 60)
}

TEST_CASE("every generated target equals the rule applied to its source") {
  SynthSpec spec = base_spec("ted", 0.7, 0);
  spec.style_markers = {"xq"};
  Corpus c = synth_domain_corpus(spec, 99);
  REQUIRE(c.size() == 40);
  for (const SentencePair& p : c.pairs) {
    CHECK(p.target == apply_rule(spec.rule_seed, p.source));
    CHECK(p.source.size() == p.target.size());
    CHECK(p.source[0] == "xq");  // marker prepended, mapped to itself
    CHECK(p.target[0] == "xq");
  }
}

TEST_CASE("the rule is a bijection on syllables and identity on markers") {
  auto out = apply_rule(7, {"pato", "xq", "lu"});
  REQUIRE(out.size() == 3);
  CHECK(out[1] == "xq");
  CHECK(out[0].size() == 4);  // two syllables in, two out
  CHECK(out[2].size() == 2);
  // Injectivity on the syllable inventory: distinct syllables map distinctly.
  std::vector<std::string> sylls;
  for (char cch : std::string("ptkbdgmnsl"))
    for (char v : std::string("aeiou")) sylls.push_back(std::string{cch, v});
  auto mapped = apply_rule(7, sylls);
  std::set<std::string> uniq(mapped.begin(), mapped.end());
  CHECK(uniq.size() == sylls.size());
  // Different rule seeds give different translations of the same corpus.
  CHECK(apply_rule(7, sylls) != apply_rule(8, sylls));
}

TEST_CASE("synthesis is deterministic per (spec, seed) and varies with seed") {
  SynthSpec spec = base_spec("news", 0.4, 2);
  Corpus a = synth_domain_corpus(spec, 5);
  Corpus b = synth_domain_corpus(spec, 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.pairs[i].source == b.pairs[i].source);
    CHECK(a.pairs[i].target == b.pairs[i].target);
  }
  Corpus c = synth_domain_corpus(spec, 6);
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) same = same && a.pairs[i].source == c.pairs[i].source;
  CHECK_FALSE(same);
}

TEST_CASE("degenerate specs are rejected") {
  SynthSpec spec = base_spec("bad", 0.5, 0);
  spec.vocab_size = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec("bad", 1.5, 0);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec("bad", 0.5, 0);
  spec.min_words = 4;
  spec.max_words = 2;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = base_spec("bad", 0.5, 0);
  spec.style_markers = {"pato"};  // collides with the syllable language
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("specs parse from config files with prefixes") {
  auto cfg = KvConfig::parse_string(
      "ted.domain_tag = ted\n"
      "ted.rule_seed = 11\n"
      "ted.vocab_size = 80\n"
      "ted.overlap = 0.25\n"
      "ted.exclusive_slot = 1\n"
      "ted.style_markers = xq xr\n"
      "ted.num_pairs = 12\n"
      "ted.min_words = 2\n"
      "ted.max_words = 3\n");
  SynthSpec spec = SynthSpec::from_config(cfg, "ted");
  CHECK(spec.domain_tag == "ted");
  CHECK(spec.rule_seed == 11);
  CHECK(spec.vocab_size == 80);
  CHECK(spec.overlap == doctest::Approx(0.25));
  CHECK(spec.exclusive_slot == 1);
  CHECK(spec.style_markers == std::vector<std::string>{"xq", "xr"});
  CHECK(spec.num_pairs == 12);
  CHECK(spec.min_words == 2);
  CHECK(spec.max_words == 3);
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

namespace {

// Fingerprint of a pair for multiset comparison.
using Fp = std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>>;

std::multiset<Fp> batch_multiset(const std::vector<Batch>& batches) {
  std::multiset<Fp> out;
  for (const Batch& b : batches) {
    for (std::int64_t i = 0; i < b.batch_size; ++i) {
      Fp fp;
      for (std::int64_t j = 0; j < b.src_lens[i]; ++j) fp.first.push_back(b.src_at(i, j));
      for (std::int64_t j = 0; j < b.tgt_lens[i]; ++j) fp.second.push_back(b.tgt_at(i, j));
      out.insert(std::move(fp));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("one pair yields one batch holding exactly that pair") {
  Corpus c;
  c.domain_tag = "d";
  c.pairs = {{{"pa", "to"}, {"ap", "ot"}}};
  BpeModel bpe = learn_bpe(c, 4);
  Vocabulary vocab = build_vocab(c, bpe, 64);
  auto batches = make_batches(c, bpe, vocab, 100, 1);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].batch_size == 1);
  CHECK(batches[0].src_lens[0] == static_cast<std::int64_t>(encode(c.pairs[0].source, bpe, vocab).size()));
}

TEST_CASE("batches partition the corpus as a multiset") {
  SynthSpec spec = base_spec("part", 0.8, 0);
  spec.num_pairs = 60;
  Corpus c = synth_domain_corpus(spec, 3);
  BpeModel bpe = learn_bpe(c, 30);
  Vocabulary vocab = build_vocab(c, bpe, 200);

  auto batches = make_batches(c, bpe, vocab, 120, 4);
  CHECK(batches.size() > 1);

  // Multiset oracle: encode every pair directly and compare.
  std::multiset<Fp> want;
  for (const SentencePair& p : c.pairs)
    want.insert({encode(p.source, bpe, vocab), encode(p.target, bpe, vocab)});
  CHECK(batch_multiset(batches) == want);

  // Budget respected by every batch.
  for (const Batch& b : batches) CHECK(b.token_count <= 120);
}

TEST_CASE("batch order is seed-deterministic and seed-sensitive") {
  SynthSpec spec = base_spec("ord", 0.8, 0);
  spec.num_pairs = 50;
  Corpus c = synth_domain_corpus(spec, 3);
  BpeModel bpe = learn_bpe(c, 20);
  Vocabulary vocab = build_vocab(c, bpe, 150);

  auto b1 = make_batches(c, bpe, vocab, 90, 42);
  auto b2 = make_batches(c, bpe, vocab, 90, 42);
  REQUIRE(b1.size() == b2.size());
  for (std::size_t i = 0; i < b1.size(); ++i) {
    CHECK(b1[i].source == b2[i].source);
    CHECK(b1[i].target == b2[i].target);
  }
  auto b3 = make_batches(c, bpe, vocab, 90, 43);
  bool same_order = b1.size() == b3.size();
  if (same_order)
    for (std::size_t i = 0; i < b1.size(); ++i)
      same_order = same_order && b1[i].source == b3[i].source;
  CHECK_FALSE(same_order);
}

TEST_CASE("padding sits only at row tails and pad id is 0") {
  Corpus c;
  c.domain_tag = "d";
  c.pairs = {{{"pa"}, {"ap"}}, {{"pa", "to", "ku"}, {"ap", "ot", "uk"}}};
  BpeModel bpe = learn_bpe(c, 10);
  Vocabulary vocab = build_vocab(c, bpe, 64);
  auto batches = make_batches(c, bpe, vocab, 1000, 1);
  REQUIRE(batches.size() == 1);
  const Batch& b = batches[0];
  REQUIRE(b.batch_size == 2);
  for (std::int64_t i = 0; i < b.batch_size; ++i) {
    for (std::int64_t j = 0; j < b.src_len; ++j) {
      if (j < b.src_lens[i])
        CHECK(b.src_at(i, j) != Vocabulary::kPad);
      else
        CHECK(b.src_at(i, j) == Vocabulary::kPad);
    }
    for (std::int64_t j = 0; j < b.tgt_len; ++j) {
      if (j < b.tgt_lens[i])
        CHECK(b.tgt_at(i, j) != Vocabulary::kPad);
      else
        CHECK(b.tgt_at(i, j) == Vocabulary::kPad);
    }
  }
}

TEST_CASE("a pair larger than the budget is a configuration error") {
  Corpus c;
  c.domain_tag = "d";
  c.pairs = {{{"pato", "kalu", "mino"}, {"atop", "alak", "inom"}}};
  BpeModel bpe = learn_bpe(c, 0);
  Vocabulary vocab = build_vocab(c, bpe, 64);
  CHECK_THROWS_AS(make_batches(c, bpe, vocab, 5, 1), ConfigError);
}
