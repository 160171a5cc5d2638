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

#ifndef IDDA_REPORTING_HPP
#define IDDA_REPORTING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "idda/decoding.hpp"
#include "idda/idda.hpp"

namespace idda {

// ---------------------------------------------------------------------------
// Run-directory persistence. Layout:
//   lock                          held while a subcommand owns the directory
//   registry.log                  every candidate offered to a registry
//   checkpoints/{domain}/{k}.ckpt initial (k=0) and per-iteration candidates
//   checkpoints/{model_id}.ckpt   final models of idda/baseline/train runs
//   logs/transfers.jsonl          per-step training records
//   decodes/{model_id}.{col}.hyp  stored decode output, one sentence per line
//   decodes/{col}.ref             matching references
//   results.json                  per-model score rows + config echo + seed
//   metrics.csv                   dev BLEU vs iteration (plot_metrics)
//   report.txt / report.json      rendered tables (report)
// ---------------------------------------------------------------------------

// Advisory single-owner lock on a run directory; the constructor creates
// `run_dir/lock` exclusively (IoError if it already exists) and the
// destructor removes it.
class RunLock {
 public:
  explicit RunLock(const std::string& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string path_;
};

// One line of registry.log.
struct RegistryLogEntry {
  std::int64_t iteration = 0;
  std::string domain;
  std::string direction;  // "init" for the seeded iteration-0 entries
  double dev_score = 0.0;
  bool accepted = false;
  std::string checkpoint;  // file name under checkpoints/{domain}/

  bool operator==(const RegistryLogEntry&) const = default;
};

void append_registry_entry(const std::string& path, const RegistryLogEntry& entry);

// Loads and validates a registry log: every domain must be seeded by an
// accepted "init" entry, and accepted scores must strictly increase
// (InvariantError otherwise; IoError if the file is missing or malformed).
std::vector<RegistryLogEntry> load_registry_log(const std::string& path);

// IddaObserver that persists every candidate: checkpoints under
// checkpoints/{domain}/ plus one registry.log line each.
class RunDirWriter : public IddaObserver {
 public:
  explicit RunDirWriter(const std::string& run_dir);
  void on_initial(const std::string& domain, const ModelParams& model,
                  double dev_score) override;
  void on_candidate(std::int64_t iteration, Direction dir, const std::string& domain,
                    const ModelParams& model, double dev_score,
                    bool accepted) override;

 private:
  std::string save(const std::string& domain, std::int64_t iteration,
                   const ModelParams& model);
  std::string run_dir_;
  std::vector<std::pair<std::string, std::int64_t>> seen_;  // (domain, k) counts
};

// ---------------------------------------------------------------------------
// Metrics (Figure 3 data): CSV with header "iteration,model_id,dev_bleu".
// For every domain in a registry log two series are emitted: the raw
// candidate scores under "{prefix}{domain}", and the running registry best
// under "{prefix}{domain}-best" (non-decreasing by construction). A run
// directory with a top-level registry.log yields unprefixed series; otherwise
// every immediate subdirectory with a registry.log contributes series
// prefixed "{subdir}/".
// ---------------------------------------------------------------------------

std::string metrics_csv(const std::vector<RegistryLogEntry>& entries,
                        const std::string& prefix);

// Writes {run_dir}/metrics.csv and returns its content. IoError if no
// registry log is found.
std::string plot_metrics(const std::string& run_dir);

// ---------------------------------------------------------------------------
// Results and reports.
// ---------------------------------------------------------------------------

struct ScoreCell {
  std::string column;  // e.g. "ted_dev", "news_test"
  double bleu = 0.0;
};

// Merges one model's scores into {run_dir}/results.json (replacing any
// existing row with the same model_id, preserving row order otherwise).
void record_result(const std::string& run_dir, const std::string& model_id,
                   const std::vector<ScoreCell>& cells, double wall_time_sec);

// Stores the config echo and master seed once per run directory.
void record_run_config(const std::string& run_dir, const std::string& config_text,
                       std::uint64_t seed);

// Translates `dev` with `model`, stores the hypotheses under
// decodes/{model_id}.{column}.hyp (and the references under
// decodes/{column}.ref if not present), and returns the corpus BLEU.
double store_decode(const std::string& run_dir, const std::string& model_id,
                    const std::string& column, const Corpus& dev,
                    const ModelParams& model, const BpeModel& bpe,
                    const Vocabulary& vocab, const DecodeConfig& cfg);

// Re-scores every stored decode against its reference, verifies the scores
// recorded in results.json (InvariantError on disagreement > 1e-6), renders
// {run_dir}/report.txt (fixed-order, column-aligned) and {run_dir}/report.json,
// and returns the text report. Byte-identical when run twice.
std::string write_report(const std::string& run_dir);

}  // namespace idda

#endif  // IDDA_REPORTING_HPP
