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

#include "idda/corpus.hpp"

#include <fstream>

#include "idda/common.hpp"

namespace idda {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::string role_name(CorpusRole role) {
  switch (role) {
    case CorpusRole::kTrain: return "train";
    case CorpusRole::kDev: return "dev";
    case CorpusRole::kTest: return "test";
  }
  return "?";
}

Corpus load_parallel(const std::string& source_path, const std::string& target_path,
                     const std::string& domain_tag, CorpusRole role) {
  if (domain_tag.empty()) throw InputError("load_parallel: empty domain tag");
  std::vector<std::string> src = read_lines(source_path);
  std::vector<std::string> tgt = read_lines(target_path);
  if (src.size() != tgt.size())
    throw AlignmentError(src.size(), tgt.size(),
                         source_path + " vs " + target_path);
  Corpus corpus;
  corpus.domain_tag = domain_tag;
  corpus.role = role;
  corpus.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i)
    corpus.pairs.push_back({split_whitespace(src[i]), split_whitespace(tgt[i])});
  return corpus;
}

void save_parallel(const Corpus& corpus, const std::string& source_path,
                   const std::string& target_path) {
  std::ofstream src(source_path), tgt(target_path);
  if (!src) throw IoError("cannot write corpus file: " + source_path);
  if (!tgt) throw IoError("cannot write corpus file: " + target_path);
  for (const SentencePair& p : corpus.pairs) {
    src << join_tokens(p.source) << '\n';
    tgt << join_tokens(p.target) << '\n';
  }
}

Corpus filter_by_length(const Corpus& corpus, std::int64_t max_len) {
  if (max_len < 1) throw ConfigError("filter_by_length: max_len must be >= 1");
  Corpus out;
  out.domain_tag = corpus.domain_tag;
  out.role = corpus.role;
  for (const SentencePair& p : corpus.pairs) {
    if (p.source.empty() || p.target.empty()) continue;
    if (static_cast<std::int64_t>(p.source.size()) > max_len) continue;
    if (static_cast<std::int64_t>(p.target.size()) > max_len) continue;
    out.pairs.push_back(p);
  }
  return out;
}

Corpus oversample_mix(const Corpus& in_corpus, const Corpus& out_corpus) {
  if (in_corpus.empty() || out_corpus.empty())
    throw InputError("oversample_mix: both corpora must be non-empty");
  const std::size_t repeats =
      (out_corpus.size() + in_corpus.size() - 1) / in_corpus.size();  // ceil
  Corpus out;
  out.domain_tag = in_corpus.domain_tag + "+" + out_corpus.domain_tag;
  out.role = CorpusRole::kTrain;
  out.pairs.reserve(repeats * in_corpus.size() + out_corpus.size());
  for (std::size_t r = 0; r < repeats; ++r)
    out.pairs.insert(out.pairs.end(), in_corpus.pairs.begin(), in_corpus.pairs.end());
  out.pairs.insert(out.pairs.end(), out_corpus.pairs.begin(), out_corpus.pairs.end());
  return out;
}

Corpus concat_corpora(const std::vector<const Corpus*>& parts, const std::string& tag,
                      CorpusRole role) {
  Corpus out;
  out.domain_tag = tag;
  out.role = role;
  for (const Corpus* c : parts)
    out.pairs.insert(out.pairs.end(), c->pairs.begin(), c->pairs.end());
  return out;
}

}  // namespace idda
