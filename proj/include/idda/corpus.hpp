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

#ifndef IDDA_CORPUS_HPP
#define IDDA_CORPUS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace idda {

// One aligned sentence pair, whitespace-tokenized on both sides.
struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

enum class CorpusRole { kTrain, kDev, kTest };

std::string role_name(CorpusRole role);

// A per-domain parallel corpus. Immutable by convention after construction.
struct Corpus {
  std::vector<SentencePair> pairs;
  std::string domain_tag;
  CorpusRole role = CorpusRole::kTrain;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// Reads two aligned one-sentence-per-line UTF-8 files. Throws IoError if a
// file is unreadable and AlignmentError if the line counts differ.
Corpus load_parallel(const std::string& source_path, const std::string& target_path,
                     const std::string& domain_tag, CorpusRole role);

// Writes a corpus back out as two aligned text files.
void save_parallel(const Corpus& corpus, const std::string& source_path,
                   const std::string& target_path);

// Keeps exactly the pairs whose sides are both non-empty and both at most
// max_len tokens long; order preserved.
Corpus filter_by_length(const Corpus& corpus, std::int64_t max_len);

// In-domain pairs repeated ceil(|out| / |in|) times, then out-domain pairs.
Corpus oversample_mix(const Corpus& in_corpus, const Corpus& out_corpus);

// Plain concatenation under a new tag (the mixed-corpus baselines).
Corpus concat_corpora(const std::vector<const Corpus*>& parts, const std::string& tag,
                      CorpusRole role);

}  // namespace idda

#endif  // IDDA_CORPUS_HPP
