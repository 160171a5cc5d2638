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

#include "idda/tokenization.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "idda/common.hpp"

namespace idda {

namespace {

const char* const kReservedTokens[] = {"<pad>", "<bos>", "<eos>", "<unk>"};

// Codepoint symbols with the end-of-word marker fused onto the last one
// ("low" -> l, o, w</w>), so the marker never occupies a vocabulary slot of
// its own and any symbol carrying it is word-final by construction.
std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms = utf8_codepoints(word);
  if (!syms.empty()) syms.back() += kWordEnd;
  return syms;
}

void apply_merge(std::vector<std::string>& syms,
                 const std::pair<std::string, std::string>& rule) {
  if (syms.size() < 2) return;
  std::vector<std::string> out;
  out.reserve(syms.size());
  std::size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == rule.first && syms[i + 1] == rule.second) {
      out.push_back(rule.first + rule.second);
      i += 2;
    } else {
      out.push_back(syms[i]);
      ++i;
    }
  }
  syms = std::move(out);
}

// Word frequencies across both sides of the corpus, deterministic order.
std::map<std::string, std::int64_t> word_frequencies(const Corpus& corpus) {
  std::map<std::string, std::int64_t> freq;
  for (const SentencePair& p : corpus.pairs) {
    for (const std::string& w : p.source) ++freq[w];
    for (const std::string& w : p.target) ++freq[w];
  }
  return freq;
}

}  // namespace

std::vector<std::string> BpeModel::split_word(const std::string& word) const {
  std::vector<std::string> syms = word_symbols(word);
  for (const auto& rule : merges) apply_merge(syms, rule);
  return syms;
}

void BpeModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write merges file: " + path);
  for (const auto& [a, b] : merges) out << a << ' ' << b << '\n';
}

BpeModel BpeModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open merges file: " + path);
  BpeModel model;
  std::set<std::string> symbols;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> parts = split_whitespace(line);
    if (parts.size() != 2)
      throw IoError(path + ":" + std::to_string(lineno) + ": expected `left right` merge rule");
    model.merges.emplace_back(parts[0], parts[1]);
    symbols.insert(parts[0]);
    symbols.insert(parts[1]);
  }
  model.base_symbols.assign(symbols.begin(), symbols.end());
  return model;
}

Vocabulary::Vocabulary() {
  for (const char* t : kReservedTokens) {
    index_[t] = static_cast<std::int64_t>(tokens_.size());
    tokens_.push_back(t);
  }
}

std::int64_t Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_at(std::int64_t index) const {
  if (index < 0 || index >= size())
    throw InputError("vocabulary index out of range: " + std::to_string(index));
  return tokens_[index];
}

void Vocabulary::add(const std::string& token) {
  if (token.empty()) throw InputError("cannot add empty token to vocabulary");
  if (index_.count(token) > 0) throw InputError("duplicate vocabulary token: " + token);
  index_[token] = static_cast<std::int64_t>(tokens_.size());
  tokens_.push_back(token);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  for (const std::string& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno < kNumReserved) {
      if (line != kReservedTokens[lineno])
        throw IoError(path + ": line " + std::to_string(lineno + 1) +
                      " must be the reserved token " + kReservedTokens[lineno]);
    } else {
      vocab.add(line);
    }
    ++lineno;
  }
  if (lineno < kNumReserved)
    throw IoError(path + ": vocabulary file is missing reserved tokens");
  return vocab;
}

BpeModel learn_bpe(const Corpus& corpus, std::int64_t num_merges) {
  if (corpus.empty()) throw InputError("learn_bpe: empty corpus");
  if (num_merges < 0) throw ConfigError("learn_bpe: num_merges must be >= 0");

  std::map<std::string, std::int64_t> freq = word_frequencies(corpus);

  BpeModel model;
  std::set<std::string> inventory;
  std::vector<std::pair<std::vector<std::string>, std::int64_t>> words;
  words.reserve(freq.size());
  for (const auto& [word, count] : freq) {
    for (const std::string& cp : utf8_codepoints(word)) inventory.insert(cp);
    words.emplace_back(word_symbols(word), count);
  }
  model.base_symbols.assign(inventory.begin(), inventory.end());

  for (std::int64_t m = 0; m < num_merges; ++m) {
    // Full recount each round; std::map gives the lexicographic tie-break.
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_counts;
    for (const auto& [syms, count] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        pair_counts[{syms[i], syms[i + 1]}] += count;
    if (pair_counts.empty()) break;
    auto best = pair_counts.begin();
    for (auto it = std::next(pair_counts.begin()); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    model.merges.push_back(best->first);
    for (auto& [syms, count] : words) apply_merge(syms, best->first);
  }
  return model;
}

Vocabulary build_vocab(const Corpus& corpus, const BpeModel& bpe, std::int64_t cap) {
  if (cap < Vocabulary::kNumReserved)
    throw ConfigError("build_vocab: cap must be at least " +
                      std::to_string(Vocabulary::kNumReserved) + " (reserved tokens)");
  std::map<std::string, std::int64_t> subword_freq;
  for (const auto& [word, count] : word_frequencies(corpus))
    for (const std::string& sub : bpe.split_word(word)) subword_freq[sub] += count;

  std::vector<std::pair<std::string, std::int64_t>> ranked(subword_freq.begin(),
                                                           subword_freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  for (const auto& [sub, count] : ranked) {
    if (vocab.size() >= cap) break;
    vocab.add(sub);
  }
  return vocab;
}

std::vector<std::int64_t> encode(const std::vector<std::string>& sentence, const BpeModel& bpe,
                                 const Vocabulary& vocab) {
  std::vector<std::int64_t> ids;
  ids.push_back(Vocabulary::kBos);
  for (const std::string& word : sentence)
    for (const std::string& sub : bpe.split_word(word)) ids.push_back(vocab.index_of(sub));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<std::string> decode(const std::vector<std::int64_t>& ids, const Vocabulary& vocab) {
  std::vector<std::string> words;
  std::string current;
  const std::string marker = kWordEnd;
  for (std::int64_t id : ids) {
    if (id == Vocabulary::kBos || id == Vocabulary::kEos || id == Vocabulary::kPad) continue;
    const std::string& tok = vocab.token_at(id);
    if (tok.size() >= marker.size() &&
        tok.compare(tok.size() - marker.size(), marker.size(), marker) == 0) {
      current += tok.substr(0, tok.size() - marker.size());
      if (!current.empty()) words.push_back(current);
      current.clear();
    } else {
      current += tok;
    }
  }
  if (!current.empty()) words.push_back(current);  // trailing partial word
  return words;
}

}  // namespace idda
