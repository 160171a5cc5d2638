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

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idda/adist.hpp"
#include "idda/common.hpp"
#include "idda/idda.hpp"
#include "idda/reporting.hpp"
#include "idda/synth.hpp"

namespace fs = std::filesystem;
using namespace idda;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

// ---------------------------------------------------------------------------
// Manifest-driven workspace: corpora, tokenizer, and configs are all derived
// deterministically from the manifest plus its master seed.
// ---------------------------------------------------------------------------

struct DomainSet {
  std::string tag;
  Corpus train, dev, test;
};

struct Workspace {
  KvConfig manifest;
  std::uint64_t seed = 1;
  std::string in_tag;
  std::vector<std::string> out_tags;
  std::map<std::string, DomainSet> domains;
  BpeModel bpe;
  Vocabulary vocab;
  ModelConfig model;
  TransferConfig transfer;

  const DomainSet& at(const std::string& tag) const {
    auto it = domains.find(tag);
    if (it == domains.end())
      throw InputError("unknown domain '" + tag + "' (not in the manifest)");
    return it->second;
  }
  DomainData data(const std::string& tag) const {
    const DomainSet& d = at(tag);
    return {d.tag, &d.train, &d.dev};
  }
};

SynthSpec domain_spec(const KvConfig& cfg, const std::string& tag) {
  SynthSpec s = SynthSpec::from_config(cfg, "domain." + tag);
  s.domain_tag = tag;
  // A manifest-level rule_seed is shared by every domain that does not pin
  // its own (the "shared transduction rule" of the synthetic task).
  if (!cfg.has("domain." + tag + ".rule_seed"))
    s.rule_seed = static_cast<std::uint64_t>(cfg.get_int_or("rule_seed", 1));
  return s;
}

Workspace load_workspace(const std::string& manifest_path, std::int64_t seed_override) {
  Workspace w;
  w.manifest = KvConfig::parse_file(manifest_path);
  if (seed_override >= 0) w.manifest.set("seed", std::to_string(seed_override));
  w.seed = static_cast<std::uint64_t>(w.manifest.get_int_or("seed", 1));

  w.in_tag = w.manifest.get_string_or("domains.in", "");
  if (w.in_tag.empty()) throw ConfigError("manifest must set domains.in");
  w.out_tags = w.manifest.get_list_or("domains.out");

  std::vector<std::string> all_tags = {w.in_tag};
  all_tags.insert(all_tags.end(), w.out_tags.begin(), w.out_tags.end());

  std::vector<const Corpus*> joint_parts;
  for (const std::string& tag : all_tags) {
    SynthSpec spec = domain_spec(w.manifest, tag);
    const std::int64_t dev_pairs =
        w.manifest.get_int_or("domain." + tag + ".dev_pairs", 64);
    const std::int64_t test_pairs =
        w.manifest.get_int_or("domain." + tag + ".test_pairs", dev_pairs);

    DomainSet d;
    d.tag = tag;
    d.train = synth_domain_corpus(spec, derive_seed(w.seed, "corpus-" + tag + "-train"),
                                  CorpusRole::kTrain);
    SynthSpec dev_spec = spec;
    dev_spec.num_pairs = dev_pairs;
    d.dev = synth_domain_corpus(dev_spec, derive_seed(w.seed, "corpus-" + tag + "-dev"),
                                CorpusRole::kDev);
    SynthSpec test_spec = spec;
    test_spec.num_pairs = test_pairs;
    d.test = synth_domain_corpus(test_spec,
                                 derive_seed(w.seed, "corpus-" + tag + "-test"),
                                 CorpusRole::kTest);
    w.domains.emplace(tag, std::move(d));
  }
  for (const std::string& tag : all_tags) {
    joint_parts.push_back(&w.domains.at(tag).train);
    joint_parts.push_back(&w.domains.at(tag).dev);
  }
  const Corpus joint = concat_corpora(joint_parts, "joint", CorpusRole::kTrain);
  w.bpe = learn_bpe(joint, w.manifest.get_int_or("bpe.merges", 700));
  w.vocab = build_vocab(joint, w.bpe, w.manifest.get_int_or("vocab.max_size", 4000));
  w.model = ModelConfig::from_config(w.manifest, w.vocab.size());
  w.transfer = TransferConfig::from_config(w.manifest);
  return w;
}

// Epochs for from-scratch initial training may differ from transfer epochs.
TransferConfig init_config(const Workspace& w) {
  TransferConfig c = w.transfer;
  c.lambda = 0.0;
  c.max_epochs = w.manifest.get_int_or("train.init_epochs", c.max_epochs);
  return c;
}

const Corpus& split_of(const DomainSet& d, const std::string& split) {
  if (split == "dev") return d.dev;
  if (split == "test") return d.test;
  if (split == "train") return d.train;
  throw InputError("unknown split '" + split + "' (want dev|test|train)");
}

std::string logs_path(const std::string& run_dir) {
  fs::create_directories(fs::path(run_dir) / "logs");
  return (fs::path(run_dir) / "logs" / "transfers.jsonl").string();
}

void save_final_checkpoint(const std::string& run_dir, const std::string& model_id,
                           const ModelParams& model) {
  fs::create_directories(fs::path(run_dir) / "checkpoints");
  save_params(model, (fs::path(run_dir) / "checkpoints" / (model_id + ".ckpt")).string());
}

// Scores `model` on dev+test of the listed domains, storing decodes and one
// results.json row.
void score_and_record(const Workspace& w, const std::string& run_dir,
                      const std::string& model_id, const ModelParams& model,
                      const std::vector<std::string>& tags, Clock::time_point t0) {
  std::vector<ScoreCell> cells;
  for (const std::string& tag : tags) {
    const DomainSet& d = w.at(tag);
    cells.push_back({tag + "_dev", store_decode(run_dir, model_id, tag + "_dev",
                                                d.dev, model, w.bpe, w.vocab,
                                                w.transfer.decode)});
    cells.push_back({tag + "_test", store_decode(run_dir, model_id, tag + "_test",
                                                 d.test, model, w.bpe, w.vocab,
                                                 w.transfer.decode)});
  }
  record_result(run_dir, model_id, cells, elapsed(t0));
  std::printf("%s:", model_id.c_str());
  for (const ScoreCell& c : cells) std::printf(" %s=%.2f", c.column.c_str(), c.bleu);
  std::printf("\n");
}

// Loads shared initial checkpoints (tag -> model+score) from another run's
// registry log, so ablations and baselines can reuse one training run.
std::map<std::string, InitialModel> load_inits(const std::string& init_run) {
  const std::string log = (fs::path(init_run) / "registry.log").string();
  std::map<std::string, InitialModel> inits;
  for (const RegistryLogEntry& e : load_registry_log(log)) {
    if (e.direction != "init") continue;
    const std::string ckpt =
        (fs::path(init_run) / "checkpoints" / e.domain / e.checkpoint).string();
    inits.emplace(e.domain, InitialModel{load_params(ckpt), e.dev_score});
  }
  if (inits.empty())
    throw InputError("no initial checkpoints recorded in '" + init_run + "'");
  return inits;
}

std::vector<DomainDescriptor> out_descriptors(const Workspace& w,
                                              const std::vector<std::string>& order_override,
                                              bool quiet = false) {
  if (w.out_tags.empty())
    throw ConfigError("manifest must list at least one domain under domains.out");
  std::vector<DomainDescriptor> outs;
  if (!order_override.empty()) {
    // Manual order: fabricate strictly decreasing distances so transfer_order
    // keeps the given sequence.
    double d = 2.0;
    for (const std::string& tag : order_override) {
      const DomainSet& ds = w.at(tag);
      outs.push_back({tag, &ds.train, &ds.dev, d, (2.0 - d) / 4.0});
      d -= 0.25;
    }
    return outs;
  }
  for (const std::string& tag : w.out_tags) {
    const DomainSet& ds = w.at(tag);
    const ADistanceResult r =
        proxy_a_distance(w.at(w.in_tag).train, ds.train, w.bpe, w.vocab,
                         derive_seed(w.seed, "adist-" + tag));
    if (!quiet)
      std::printf("a-distance %s vs %s: epsilon=%.4f d_A=%.4f\n", w.in_tag.c_str(),
                  tag.c_str(), r.epsilon, r.a_distance);
    outs.push_back({tag, &ds.train, &ds.dev, r.a_distance, r.epsilon});
  }
  return outs;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_synth(const Workspace& w, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& [tag, d] : w.domains) {
    for (const std::string split : {"train", "dev", "test"}) {
      const Corpus& c = split_of(d, split);
      const std::string base = (fs::path(out_dir) / (tag + "." + split)).string();
      save_parallel(c, base + ".src", base + ".tgt");
      std::printf("%s.%s: %zu pairs\n", tag.c_str(), split.c_str(), c.size());
    }
  }
}

void cmd_tokenize(const Workspace& w, const std::string& save_dir) {
  std::printf("bpe merges: %zu\n", w.bpe.merges.size());
  std::printf("vocab size: %lld\n", static_cast<long long>(w.vocab.size()));
  if (!save_dir.empty()) {
    fs::create_directories(save_dir);
    w.bpe.save((fs::path(save_dir) / "bpe.model").string());
    w.vocab.save((fs::path(save_dir) / "vocab.txt").string());
    std::printf("saved tokenizer to %s\n", save_dir.c_str());
  }
}

void cmd_adist(const Workspace& w) {
  std::vector<DomainDescriptor> outs = out_descriptors(w, {});
  const std::vector<DomainDescriptor> ordered = transfer_order(outs);
  std::printf("transfer order:");
  for (const DomainDescriptor& d : ordered) std::printf(" %s", d.domain_tag.c_str());
  std::printf("\n");
}

void cmd_train(const Workspace& w, const std::string& run_dir, std::string tag) {
  if (tag.empty()) tag = w.in_tag;
  RunLock lock(run_dir);
  record_run_config(run_dir, w.manifest.to_string(), w.seed);
  const Clock::time_point t0 = Clock::now();

  const DomainSet& d = w.at(tag);
  TransferConfig cfg = init_config(w);
  cfg.rng_seed = derive_seed(w.seed, "init-" + tag);
  FitLog log{logs_path(run_dir), 0, "init:" + tag};
  TransferResult res =
      train_initial(d.train, d.dev, w.bpe, w.vocab, w.model, cfg, &log);

  // Registry-style init entry + checkpoints/{tag}/0.ckpt, so this run can
  // seed later idda/baseline runs via --init-from.
  RunDirWriter writer(run_dir);
  writer.on_initial(tag, res.model, res.dev_bleu);

  const std::string model_id = "initial-" + tag;
  save_final_checkpoint(run_dir, model_id, res.model);
  score_and_record(w, run_dir, model_id, res.model, {tag}, t0);
  std::printf("selected step %lld, dev BLEU %.2f, %.1fs\n",
              static_cast<long long>(res.selected_step), res.dev_bleu, elapsed(t0));
}

struct IddaFlags {
  std::int64_t k = -1;
  double lambda = -1.0;
  std::string mode;
  bool early_exit = false;
  std::string model_id;
  std::string init_from;
  std::vector<std::string> order;
};

void cmd_idda(const Workspace& w, const std::string& run_dir, const IddaFlags& f) {
  RunLock lock(run_dir);
  record_run_config(run_dir, w.manifest.to_string(), w.seed);
  const Clock::time_point t0 = Clock::now();

  IddaConfig cfg = IddaConfig::from_config(w.manifest);
  if (f.k >= 0) cfg.k_iterations = f.k;
  if (f.lambda >= 0) cfg.transfer.lambda = f.lambda;
  if (f.early_exit) cfg.early_exit = true;
  if (!f.mode.empty()) {
    if (f.mode == "full") cfg.mode = IddaMode::kFull;
    else if (f.mode == "unidir") cfg.mode = IddaMode::kUnidir;
    else if (f.mode == "fixtea") cfg.mode = IddaMode::kFixTeacher;
    else throw ConfigError("--mode must be full|unidir|fixtea");
  }
  cfg.validate();

  std::string model_id = f.model_id;
  if (model_id.empty()) {
    model_id = "idda";
    if (cfg.mode == IddaMode::kUnidir) model_id += "-unidir";
    if (cfg.mode == IddaMode::kFixTeacher) model_id += "-fixtea";
    if (cfg.transfer.lambda == 0.0) model_id += "-lambda0";
  }

  const std::vector<DomainDescriptor> outs = out_descriptors(w, f.order);

  std::map<std::string, InitialModel> inits;
  const InitialModel* init_in = nullptr;
  const std::map<std::string, InitialModel>* init_outs = nullptr;
  if (!f.init_from.empty()) {
    inits = load_inits(f.init_from);
    auto it = inits.find(w.in_tag);
    if (it == inits.end())
      throw InputError("no initial checkpoint for '" + w.in_tag + "' in '" +
                       f.init_from + "'");
    init_in = &it->second;
    init_outs = &inits;
  }

  RunDirWriter writer(run_dir);
  IddaResult res =
      idda_many_to_one(w.data(w.in_tag), outs, w.bpe, w.vocab, w.model, cfg,
                       &writer, init_in, init_outs, logs_path(run_dir));

  for (const TraceEvent& e : res.trace)
    std::printf("k=%lld %s %s dev=%.2f %s\n", static_cast<long long>(e.iteration),
                to_string(e.direction).c_str(), e.domain.c_str(), e.dev_score,
                e.accepted ? "accepted" : "rejected");

  save_final_checkpoint(run_dir, model_id, res.model_in);
  std::vector<std::string> tags = {w.in_tag};
  tags.insert(tags.end(), w.out_tags.begin(), w.out_tags.end());
  score_and_record(w, run_dir, model_id, res.model_in, tags, t0);
  for (const auto& [tag, reg] : res.registries_out) {
    const std::string out_id = model_id + "@" + tag;
    save_final_checkpoint(run_dir, out_id, reg.best());
    score_and_record(w, run_dir, out_id, reg.best(), {tag}, t0);
  }
  std::printf("final in-domain dev BLEU %.2f, %.1fs\n", res.dev_bleu_in, elapsed(t0));
}

void cmd_baseline(const Workspace& w, const std::string& run_dir,
                  const std::string& kind_name, const std::string& init_from) {
  RunLock lock(run_dir);
  record_run_config(run_dir, w.manifest.to_string(), w.seed);
  const Clock::time_point t0 = Clock::now();

  const BaselineKind kind = baseline_kind_from_string(kind_name);
  const DomainSet& din = w.at(w.in_tag);
  const Corpus* d_out = nullptr;
  const Corpus* dev_out = nullptr;
  Corpus merged_train, merged_dev;
  if (kind != BaselineKind::kSingle) {
    if (w.out_tags.empty())
      throw ConfigError("baseline '" + kind_name + "' needs domains.out");
    // Contrast models are defined against one out-domain; concatenate if the
    // manifest lists several.
    if (w.out_tags.size() == 1) {
      d_out = &w.at(w.out_tags[0]).train;
      dev_out = &w.at(w.out_tags[0]).dev;
    } else {
      std::vector<const Corpus*> trains, devs;
      for (const std::string& tag : w.out_tags) {
        trains.push_back(&w.at(tag).train);
        devs.push_back(&w.at(tag).dev);
      }
      merged_train = concat_corpora(trains, "out", CorpusRole::kTrain);
      merged_dev = concat_corpora(devs, "out", CorpusRole::kDev);
      d_out = &merged_train;
      dev_out = &merged_dev;
    }
  }

  const ModelParams* init_in = nullptr;
  const ModelParams* init_out = nullptr;
  std::map<std::string, InitialModel> inits;
  if (!init_from.empty()) {
    inits = load_inits(init_from);
    if (auto it = inits.find(w.in_tag); it != inits.end()) init_in = &it->second.model;
    if (w.out_tags.size() == 1)
      if (auto it = inits.find(w.out_tags[0]); it != inits.end())
        init_out = &it->second.model;
  }

  TransferConfig cfg = w.transfer;
  cfg.rng_seed = w.seed;
  FitLog log{logs_path(run_dir), 0, "baseline:" + kind_name};
  BaselineResult res = run_baseline(kind, din.train, din.dev, d_out, dev_out, w.bpe,
                                    w.vocab, w.model, cfg, init_in, init_out, &log);

  save_final_checkpoint(run_dir, kind_name, res.model);
  std::vector<std::string> tags = {w.in_tag};
  tags.insert(tags.end(), w.out_tags.begin(), w.out_tags.end());
  score_and_record(w, run_dir, kind_name, res.model, tags, t0);
  std::printf("%s in-domain dev BLEU %.2f, %.1fs\n", kind_name.c_str(),
              res.dev_bleu_in, elapsed(t0));
}

void cmd_translate(const Workspace& w, const std::string& ckpt, const std::string& tag,
                   const std::string& split, const std::string& src_file) {
  const ModelParams model = load_params(ckpt);
  Corpus input;
  if (!src_file.empty()) {
    std::ifstream in(src_file);
    if (!in.good()) throw IoError("cannot read '" + src_file + "'");
    std::string line;
    while (std::getline(in, line)) {
      SentencePair p;
      std::istringstream ws(line);
      std::string word;
      while (ws >> word) p.source.push_back(word);
      if (!p.source.empty()) input.pairs.push_back(std::move(p));
    }
    input.domain_tag = "stdin";
  } else {
    input = split_of(w.at(tag.empty() ? w.in_tag : tag), split);
  }
  const auto hyps = translate_corpus(model, input, w.bpe, w.vocab, w.transfer.decode);
  for (const auto& words : hyps) {
    for (std::size_t i = 0; i < words.size(); ++i)
      std::printf("%s%s", i ? " " : "", words[i].c_str());
    std::printf("\n");
  }
}

void cmd_evaluate(const Workspace& w, const std::string& ckpt, const std::string& tag,
                  const std::string& split) {
  const ModelParams model = load_params(ckpt);
  const Corpus& corpus = split_of(w.at(tag.empty() ? w.in_tag : tag), split);
  const auto hyps = translate_corpus(model, corpus, w.bpe, w.vocab, w.transfer.decode);
  std::vector<std::vector<std::string>> refs;
  for (const SentencePair& p : corpus.pairs) refs.push_back(p.target);
  const BleuScore s = bleu(hyps, refs);
  std::printf("BLEU %.2f (p1=%.3f p2=%.3f p3=%.3f p4=%.3f bp=%.3f hyp=%lld ref=%lld)\n",
              s.score, s.precisions[0], s.precisions[1], s.precisions[2],
              s.precisions[3], s.brevity_penalty,
              static_cast<long long>(s.hyp_length),
              static_cast<long long>(s.ref_length));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"idda-lab: a desk-scale laboratory for iterative dual domain adaptation"};
  app.require_subcommand(1);

  std::string manifest, run_dir, out_dir, save_dir, domain, split = "dev";
  std::string ckpt, src_file, kind, init_from;
  std::int64_t seed_override = -1;
  IddaFlags idda_flags;

  auto add_manifest = [&](CLI::App* cmd) {
    cmd->add_option("-m,--manifest", manifest, "manifest file")->required();
    cmd->add_option("-s,--seed", seed_override, "override the manifest seed");
  };

  CLI::App* c_synth = app.add_subcommand("synth", "generate the synthetic corpora");
  add_manifest(c_synth);
  c_synth->add_option("-o,--out", out_dir, "output directory")->required();

  CLI::App* c_tok = app.add_subcommand("tokenize", "learn BPE + vocabulary");
  add_manifest(c_tok);
  c_tok->add_option("--save", save_dir, "directory to save tokenizer files");

  CLI::App* c_adist = app.add_subcommand("adist", "proxy A-distances and transfer order");
  add_manifest(c_adist);

  CLI::App* c_train = app.add_subcommand("train", "train an initial model");
  add_manifest(c_train);
  c_train->add_option("-r,--run", run_dir, "run directory")->required();
  c_train->add_option("-d,--domain", domain, "domain tag (default: domains.in)");

  CLI::App* c_idda = app.add_subcommand("idda", "run iterative dual domain adaptation");
  add_manifest(c_idda);
  c_idda->add_option("-r,--run", run_dir, "run directory")->required();
  c_idda->add_option("--k", idda_flags.k, "iteration count K");
  c_idda->add_option("--lambda", idda_flags.lambda, "distillation coefficient");
  c_idda->add_option("--mode", idda_flags.mode, "full|unidir|fixtea");
  c_idda->add_flag("--early-exit", idda_flags.early_exit,
                   "stop after an iteration with no accepted candidate");
  c_idda->add_option("--model-id", idda_flags.model_id, "row id in the report");
  c_idda->add_option("--init-from", idda_flags.init_from,
                     "reuse initial checkpoints from this run directory");
  c_idda->add_option("--order", idda_flags.order,
                     "explicit out-domain order (overrides A-distance)");

  CLI::App* c_base = app.add_subcommand("baseline", "run a contrast model");
  add_manifest(c_base);
  c_base->add_option("-r,--run", run_dir, "run directory")->required();
  c_base->add_option("-k,--kind", kind, "single|mix|ft|mft|kd")->required();
  c_base->add_option("--init-from", init_from,
                     "reuse initial checkpoints from this run directory");

  CLI::App* c_xlate = app.add_subcommand("translate", "translate with a checkpoint");
  add_manifest(c_xlate);
  c_xlate->add_option("-c,--ckpt", ckpt, "checkpoint file")->required();
  c_xlate->add_option("-d,--domain", domain, "domain tag (default: domains.in)");
  c_xlate->add_option("--split", split, "dev|test|train");
  c_xlate->add_option("--src", src_file, "translate these raw source lines instead");

  CLI::App* c_eval = app.add_subcommand("evaluate", "score a checkpoint");
  add_manifest(c_eval);
  c_eval->add_option("-c,--ckpt", ckpt, "checkpoint file")->required();
  c_eval->add_option("-d,--domain", domain, "domain tag (default: domains.in)");
  c_eval->add_option("--split", split, "dev|test|train");

  CLI::App* c_report = app.add_subcommand("report", "render report.txt/report.json");
  c_report->add_option("-r,--run", run_dir, "run directory")->required();

  CLI::App* c_plot = app.add_subcommand("plot", "emit dev-BLEU-vs-iteration CSV");
  c_plot->add_option("-r,--run", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_report->parsed()) {
      std::fputs(write_report(run_dir).c_str(), stdout);
      return 0;
    }
    if (c_plot->parsed()) {
      const std::string csv = plot_metrics(run_dir);
      std::printf("wrote %s (%zu data rows)\n",
                  (fs::path(run_dir) / "metrics.csv").string().c_str(),
                  static_cast<std::size_t>(
                      std::count(csv.begin(), csv.end(), '\n') - 1));
      return 0;
    }

    const Workspace w = load_workspace(manifest, seed_override);
    if (c_synth->parsed()) cmd_synth(w, out_dir);
    if (c_tok->parsed()) cmd_tokenize(w, save_dir);
    if (c_adist->parsed()) cmd_adist(w);
    if (c_train->parsed()) cmd_train(w, run_dir, domain);
    if (c_idda->parsed()) cmd_idda(w, run_dir, idda_flags);
    if (c_base->parsed()) cmd_baseline(w, run_dir, kind, init_from);
    if (c_xlate->parsed()) cmd_translate(w, ckpt, domain, split, src_file);
    if (c_eval->parsed()) cmd_evaluate(w, ckpt, domain, split);
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}
