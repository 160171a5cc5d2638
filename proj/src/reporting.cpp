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

#include "idda/reporting.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "idda/common.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace idda {

namespace {

std::string format_score(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out.good()) throw IoError("failed writing '" + path + "'");
}

json load_results_json(const std::string& path) {
  if (!fs::exists(path)) return json{{"rows", json::array()}};
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError("malformed results file '" + path + "': " + e.what());
  }
}

void save_json(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<std::vector<std::string>> read_sentence_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError("cannot read '" + path + "'");
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> words;
    std::istringstream ws(line);
    std::string w;
    while (ws >> w) words.push_back(w);
    sentences.push_back(std::move(words));
  }
  return sentences;
}

void write_sentence_file(const std::string& path,
                         const std::vector<std::vector<std::string>>& sentences) {
  std::ostringstream out;
  for (const auto& words : sentences) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i > 0) out << ' ';
      out << words[i];
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace

// ---------------------------------------------------------------------------
// RunLock
// ---------------------------------------------------------------------------

RunLock::RunLock(const std::string& run_dir) {
  fs::create_directories(run_dir);
  path_ = (fs::path(run_dir) / "lock").string();
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw IoError("run directory is locked by another process (remove '" + path_ +
                  "' if that process is gone)");
  const std::string pid = std::to_string(::getpid()) + "\n";
  const ssize_t written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  if (written < 0) throw IoError("cannot write lock file '" + path_ + "'");
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---------------------------------------------------------------------------
// Registry log
// ---------------------------------------------------------------------------

void append_registry_entry(const std::string& path, const RegistryLogEntry& entry) {
  if (entry.domain.find('\t') != std::string::npos ||
      entry.direction.find('\t') != std::string::npos)
    throw InputError("registry fields must not contain tabs");
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out.good()) throw IoError("cannot open registry log '" + path + "'");
  out << entry.iteration << '\t' << entry.domain << '\t' << entry.direction << '\t'
      << format_score(entry.dev_score) << '\t' << (entry.accepted ? 1 : 0) << '\t'
      << entry.checkpoint << '\n';
  if (!out.good()) throw IoError("failed writing registry log '" + path + "'");
}

std::vector<RegistryLogEntry> load_registry_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError("cannot read registry log '" + path + "'");

  std::vector<RegistryLogEntry> entries;
  std::map<std::string, double> best;  // running accepted best per domain
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 6)
      throw IoError("registry log '" + path + "' line " + std::to_string(line_no) +
                    ": expected 6 tab-separated fields");
    RegistryLogEntry e;
    try {
      e.iteration = std::stoll(fields[0]);
      e.dev_score = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw IoError("registry log '" + path + "' line " + std::to_string(line_no) +
                    ": malformed number");
    }
    e.domain = fields[1];
    e.direction = fields[2];
    e.accepted = fields[4] == "1";
    e.checkpoint = fields[5];

    auto it = best.find(e.domain);
    if (it == best.end()) {
      if (e.direction != "init" || !e.accepted || e.iteration != 0)
        throw InvariantError("registry log '" + path + "' line " +
                             std::to_string(line_no) + ": domain '" + e.domain +
                             "' must start with an accepted init entry at iteration 0");
      best.emplace(e.domain, e.dev_score);
    } else if (e.accepted) {
      if (!(e.dev_score > it->second))
        throw InvariantError("registry log '" + path + "' line " +
                             std::to_string(line_no) +
                             ": accepted score does not beat the incumbent best");
      it->second = e.dev_score;
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty())
    throw IoError("registry log '" + path + "' is empty");
  return entries;
}

// ---------------------------------------------------------------------------
// RunDirWriter
// ---------------------------------------------------------------------------

RunDirWriter::RunDirWriter(const std::string& run_dir) : run_dir_(run_dir) {
  fs::create_directories(fs::path(run_dir_) / "checkpoints");
}

std::string RunDirWriter::save(const std::string& domain, std::int64_t iteration,
                               const ModelParams& model) {
  const fs::path dir = fs::path(run_dir_) / "checkpoints" / domain;
  fs::create_directories(dir);
  std::int64_t repeat = 0;
  for (const auto& [d, k] : seen_)
    if (d == domain && k == iteration) ++repeat;
  seen_.emplace_back(domain, iteration);
  std::string name = std::to_string(iteration);
  if (repeat > 0) name += "." + std::to_string(repeat);
  name += ".ckpt";
  save_params(model, (dir / name).string());
  return name;
}

void RunDirWriter::on_initial(const std::string& domain, const ModelParams& model,
                              double dev_score) {
  const std::string name = save(domain, 0, model);
  append_registry_entry((fs::path(run_dir_) / "registry.log").string(),
                        {0, domain, "init", dev_score, true, name});
}

void RunDirWriter::on_candidate(std::int64_t iteration, Direction dir,
                                const std::string& domain, const ModelParams& model,
                                double dev_score, bool accepted) {
  const std::string name = save(domain, iteration, model);
  append_registry_entry((fs::path(run_dir_) / "registry.log").string(),
                        {iteration, domain, to_string(dir), dev_score, accepted, name});
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

std::string metrics_csv(const std::vector<RegistryLogEntry>& entries,
                        const std::string& prefix) {
  std::vector<std::string> domain_order;
  for (const RegistryLogEntry& e : entries)
    if (std::find(domain_order.begin(), domain_order.end(), e.domain) ==
        domain_order.end())
      domain_order.push_back(e.domain);

  std::ostringstream out;
  for (const std::string& domain : domain_order) {
    // Raw candidate scores (the unaccepted ones included), then the running
    // registry best after each offer.
    for (const RegistryLogEntry& e : entries)
      if (e.domain == domain)
        out << e.iteration << ',' << prefix << domain << ','
            << format_score(e.dev_score) << '\n';
    double best = 0.0;
    bool seeded = false;
    for (const RegistryLogEntry& e : entries) {
      if (e.domain != domain) continue;
      if (!seeded || (e.accepted && e.dev_score > best)) best = e.dev_score;
      seeded = true;
      out << e.iteration << ',' << prefix << domain << "-best,"
          << format_score(best) << '\n';
    }
  }
  return out.str();
}

std::string plot_metrics(const std::string& run_dir) {
  std::string body;
  const fs::path top_log = fs::path(run_dir) / "registry.log";
  if (fs::exists(top_log)) {
    body += metrics_csv(load_registry_log(top_log.string()), "");
  } else {
    std::vector<std::string> subs;
    if (fs::is_directory(run_dir))
      for (const auto& entry : fs::directory_iterator(run_dir))
        if (entry.is_directory() &&
            fs::exists(entry.path() / "registry.log"))
          subs.push_back(entry.path().filename().string());
    std::sort(subs.begin(), subs.end());
    for (const std::string& sub : subs)
      body += metrics_csv(
          load_registry_log((fs::path(run_dir) / sub / "registry.log").string()),
          sub + "/");
  }
  if (body.empty())
    throw IoError("no registry.log found under '" + run_dir +
                  "' (is this a finished run directory?)");
  const std::string csv = "iteration,model_id,dev_bleu\n" + body;
  write_text_file((fs::path(run_dir) / "metrics.csv").string(), csv);
  return csv;
}

// ---------------------------------------------------------------------------
// Results and reports
// ---------------------------------------------------------------------------

void record_result(const std::string& run_dir, const std::string& model_id,
                   const std::vector<ScoreCell>& cells, double wall_time_sec) {
  fs::create_directories(run_dir);
  const std::string path = (fs::path(run_dir) / "results.json").string();
  json results = load_results_json(path);

  json scores = json::object();
  for (const ScoreCell& c : cells) scores[c.column] = c.bleu;
  json row = {{"model_id", model_id},
              {"scores", scores},
              {"wall_time_sec", wall_time_sec}};

  bool replaced = false;
  for (json& r : results["rows"])
    if (r.value("model_id", "") == model_id) {
      r = row;
      replaced = true;
    }
  if (!replaced) results["rows"].push_back(row);
  save_json(path, results);
}

void record_run_config(const std::string& run_dir, const std::string& config_text,
                       std::uint64_t seed) {
  fs::create_directories(run_dir);
  const std::string path = (fs::path(run_dir) / "results.json").string();
  json results = load_results_json(path);
  results["config"] = config_text;
  results["seed"] = seed;
  save_json(path, results);
}

double store_decode(const std::string& run_dir, const std::string& model_id,
                    const std::string& column, const Corpus& dev,
                    const ModelParams& model, const BpeModel& bpe,
                    const Vocabulary& vocab, const DecodeConfig& cfg) {
  if (model_id.find('/') != std::string::npos ||
      column.find('/') != std::string::npos)
    throw InputError("model ids and column names must not contain '/'");
  const fs::path dir = fs::path(run_dir) / "decodes";
  fs::create_directories(dir);

  const std::vector<std::vector<std::string>> hyps =
      translate_corpus(model, dev, bpe, vocab, cfg);
  std::vector<std::vector<std::string>> refs;
  refs.reserve(dev.size());
  for (const SentencePair& p : dev.pairs) refs.push_back(p.target);

  write_sentence_file((dir / (model_id + "." + column + ".hyp")).string(), hyps);
  const fs::path ref_path = dir / (column + ".ref");
  if (!fs::exists(ref_path)) write_sentence_file(ref_path.string(), refs);

  return bleu(hyps, refs).score;
}

std::string write_report(const std::string& run_dir) {
  const std::string results_path = (fs::path(run_dir) / "results.json").string();
  if (!fs::exists(results_path))
    throw IoError("no results.json under '" + run_dir +
                  "' (run idda/baseline/train first)");
  const json results = load_results_json(results_path);

  // Re-derive every score from the stored decodes; the report carries the
  // re-derived numbers, and any disagreement with results.json is an
  // invariant failure.
  struct Row {
    std::string model_id;
    std::map<std::string, double> scores;
    double wall = 0.0;
  };
  std::vector<Row> rows;
  std::set<std::string> columns;
  for (const json& r : results.value("rows", json::array())) {
    Row row;
    row.model_id = r.value("model_id", "");
    row.wall = r.value("wall_time_sec", 0.0);
    const json scores = r.value("scores", json::object());
    for (const auto& [column, stored] : scores.items()) {
      const std::string hyp_path =
          (fs::path(run_dir) / "decodes" / (row.model_id + "." + column + ".hyp"))
              .string();
      const std::string ref_path =
          (fs::path(run_dir) / "decodes" / (column + ".ref")).string();
      const double rescored =
          bleu(read_sentence_file(hyp_path), read_sentence_file(ref_path)).score;
      if (std::abs(rescored - stored.get<double>()) > 1e-6)
        throw InvariantError("stored score for " + row.model_id + "/" + column +
                             " does not match its decode output (see '" + hyp_path +
                             "')");
      row.scores[column] = rescored;
      columns.insert(column);
    }
    rows.push_back(std::move(row));
  }

  // Fixed-order, column-aligned table.
  std::vector<std::string> cols(columns.begin(), columns.end());
  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = {"model"};
  header.insert(header.end(), cols.begin(), cols.end());
  header.push_back("wall_s");
  table.push_back(header);
  for (const Row& row : rows) {
    std::vector<std::string> cells = {row.model_id};
    for (const std::string& c : cols) {
      auto it = row.scores.find(c);
      char buf[32];
      if (it != row.scores.end())
        std::snprintf(buf, sizeof(buf), "%.2f", it->second);
      else
        std::snprintf(buf, sizeof(buf), "-");
      cells.emplace_back(buf);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", row.wall);
    cells.emplace_back(buf);
    table.push_back(std::move(cells));
  }

  std::vector<std::size_t> widths(table.front().size(), 0);
  for (const auto& r : table)
    for (std::size_t i = 0; i < r.size(); ++i)
      widths[i] = std::max(widths[i], r[i].size());

  std::ostringstream out;
  out << "# IDDA run report\n\n";
  out << "seed: " << results.value("seed", 0) << "\n\n";
  for (const auto& r : table) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i > 0) out << "  ";
      // First column left-aligned, numbers right-aligned.
      const std::string pad(widths[i] - r[i].size(), ' ');
      out << (i == 0 ? r[i] + pad : pad + r[i]);
    }
    out << '\n';
  }
  if (results.contains("config")) {
    out << "\n## config\n" << results["config"].get<std::string>();
    if (!results["config"].get<std::string>().ends_with('\n')) out << '\n';
  }

  const std::string text = out.str();
  write_text_file((fs::path(run_dir) / "report.txt").string(), text);

  json jr;
  jr["seed"] = results.value("seed", 0);
  if (results.contains("config")) jr["config"] = results["config"];
  jr["rows"] = json::array();
  for (const Row& row : rows) {
    json scores = json::object();
    for (const auto& [c, v] : row.scores) scores[c] = v;
    jr["rows"].push_back({{"model_id", row.model_id},
                          {"scores", scores},
                          {"wall_time_sec", row.wall}});
  }
  save_json((fs::path(run_dir) / "report.json").string(), jr);
  return text;
}

}  // namespace idda
