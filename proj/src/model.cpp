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

#include "idda/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "idda/common.hpp"
#include "idda/tokenization.hpp"

namespace idda {

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1 || num_heads < 1 || num_layers < 1 ||
      max_positions < 2)
    throw ConfigError("model config: all dimensions must be positive");
  if (vocab_size < 5)
    throw ConfigError("model config: vocab_size must exceed the 4 reserved tokens");
  if (embed_dim % num_heads != 0)
    throw ConfigError("model config: embed_dim must be divisible by num_heads");
}

ModelConfig ModelConfig::from_config(const KvConfig& cfg, std::int64_t vocab_size) {
  ModelConfig m;
  m.embed_dim = cfg.get_int_or("model.embed_dim", m.embed_dim);
  m.hidden_dim = cfg.get_int_or("model.hidden_dim", m.hidden_dim);
  m.num_heads = cfg.get_int_or("model.num_heads", m.num_heads);
  m.num_layers = cfg.get_int_or("model.num_layers", m.num_layers);
  m.max_positions = cfg.get_int_or("model.max_positions", m.max_positions);
  m.vocab_size = vocab_size;
  m.validate();
  return m;
}

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  const std::int64_t d = c.embed_dim, h = c.hidden_dim, V = c.vocab_size, P = c.max_positions;
  std::vector<ParamSpec> specs;
  auto add = [&](const std::string& name, std::vector<std::int64_t> shape) {
    specs.push_back({name, std::move(shape)});
  };
  auto add_ln = [&](const std::string& base) {
    add(base + ".gain", {d});
    add(base + ".shift", {d});
  };
  auto add_attn = [&](const std::string& base) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) add(base + "." + w, {d, d});
  };
  auto add_ffn = [&](const std::string& base) {
    add(base + ".w1", {d, h});
    add(base + ".b1", {h});
    add(base + ".w2", {h, d});
    add(base + ".b2", {d});
  };

  add("enc.embed", {V, d});
  add("enc.pos", {P, d});
  for (std::int64_t i = 0; i < c.num_layers; ++i) {
    const std::string L = "enc.L" + std::to_string(i);
    add_ln(L + ".ln1");
    add_attn(L + ".attn");
    add_ln(L + ".ln2");
    add_ffn(L + ".ffn");
  }
  add_ln("enc.ln_out");

  add("dec.embed", {V, d});
  add("dec.pos", {P, d});
  for (std::int64_t i = 0; i < c.num_layers; ++i) {
    const std::string L = "dec.L" + std::to_string(i);
    add_ln(L + ".ln1");
    add_attn(L + ".self");
    add_ln(L + ".ln2");
    add_attn(L + ".cross");
    add_ln(L + ".ln3");
    add_ffn(L + ".ffn");
  }
  add_ln("dec.ln_out");

  add("out.proj", {d, V});
  add("out.bias", {V});
  return specs;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InvariantError("missing parameter tensor: " + name);
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InvariantError("missing parameter tensor: " + name);
  return it->second;
}

std::int64_t ModelParams::total_params() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : tensors)
    if (!t.all_finite()) return false;
  return true;
}

ModelParams init_model(const ModelConfig& config, std::uint64_t rng_seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  for (const ParamSpec& spec : param_specs(config)) {
    Tensor t(spec.shape);
    // Per-tensor sub-seed: initialization is independent of schema order.
    Rng rng(derive_seed(rng_seed, "init-" + spec.name));
    const bool is_gain = spec.name.size() >= 5 && spec.name.ends_with(".gain");
    const bool is_bias = spec.name.ends_with(".shift") || spec.name.ends_with(".b1") ||
                         spec.name.ends_with(".b2") || spec.name.ends_with(".bias");
    const bool is_table = spec.name.ends_with(".embed") || spec.name.ends_with(".pos");
    if (is_gain) {
      t.fill(1.0);
    } else if (is_bias) {
      // zeros
    } else if (is_table) {
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 0.1 * rng.next_normal();
    } else {
      // Projection matrices: Xavier-style scaling over fan-in + fan-out.
      const double std_dev =
          std::sqrt(2.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = std_dev * rng.next_normal();
    }
    p.tensors.emplace(spec.name, std::move(t));
  }
  return p;
}

ModelParams clone_params(const ModelParams& params) { return params; }

// ---------------------------------------------------------------------------
// Checkpoint format "IDDACKPT" version 1 (little-endian, documented in README):
//   magic[8] | u32 version | i64 config x6 | u64 tensor_count |
//   per tensor: u64 name_len | name | u64 rank | i64 dims... | f64 data...
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'I', 'D', 'D', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  for (std::int64_t v : {params.config.embed_dim, params.config.hidden_dim,
                         params.config.num_heads, params.config.num_layers,
                         params.config.vocab_size, params.config.max_positions})
    write_pod(out, v);
  write_pod(out, static_cast<std::uint64_t>(params.tensors.size()));
  for (const auto& [name, t] : params.tensors) {
    write_pod(out, static_cast<std::uint64_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint64_t>(t.rank()));
    for (std::int64_t dim : t.shape()) write_pod(out, dim);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  const std::uint32_t version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw VersionError("checkpoint " + path + " has format version " +
                       std::to_string(version) + "; this build reads version " +
                       std::to_string(kVersion));
  ModelParams p;
  p.config.embed_dim = read_pod<std::int64_t>(in, path);
  p.config.hidden_dim = read_pod<std::int64_t>(in, path);
  p.config.num_heads = read_pod<std::int64_t>(in, path);
  p.config.num_layers = read_pod<std::int64_t>(in, path);
  p.config.vocab_size = read_pod<std::int64_t>(in, path);
  p.config.max_positions = read_pod<std::int64_t>(in, path);
  p.config.validate();

  const std::uint64_t count = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = read_pod<std::uint64_t>(in, path);
    if (name_len > 4096) throw IoError("corrupt checkpoint (name length): " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in) throw IoError("truncated checkpoint: " + path);
    const std::uint64_t rank = read_pod<std::uint64_t>(in, path);
    if (rank > 4) throw IoError("corrupt checkpoint (rank): " + path);
    std::vector<std::int64_t> shape;
    std::int64_t size = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      shape.push_back(read_pod<std::int64_t>(in, path));
      if (shape.back() < 0) throw IoError("corrupt checkpoint (dims): " + path);
      size *= shape.back();
    }
    std::vector<double> data(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(size * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint: " + path);
    p.tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
  }

  // The stored tensor set must match the config's schema exactly.
  std::vector<ParamSpec> specs = param_specs(p.config);
  if (specs.size() != p.tensors.size())
    throw IoError("checkpoint tensor count does not match its config: " + path);
  for (const ParamSpec& spec : specs) {
    auto it = p.tensors.find(spec.name);
    if (it == p.tensors.end())
      throw IoError("checkpoint missing tensor " + spec.name + ": " + path);
    if (it->second.shape() != spec.shape)
      throw ShapeError("checkpoint tensor " + spec.name + " has shape " +
                       it->second.shape_string() + ", expected per config");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward graph
// ---------------------------------------------------------------------------

namespace {

// Shares one tape Value per parameter so gradients accumulate into a single
// buffer per tensor.
struct ModelCtx {
  Tape& tape;
  const ModelParams& params;
  const bool with_grad;
  std::map<std::string, Value> values;

  Value P(const std::string& name) {
    auto it = values.find(name);
    if (it != values.end()) return it->second;
    const Tensor& t = params.at(name);
    Value v = with_grad ? tape.leaf(t) : tape.constant_ref(t);
    values.emplace(name, v);
    return v;
  }
};

std::vector<std::int64_t> position_ids(std::int64_t batch, std::int64_t stride) {
  std::vector<std::int64_t> pos(batch * stride);
  for (std::int64_t i = 0; i < batch; ++i)
    for (std::int64_t t = 0; t < stride; ++t) pos[i * stride + t] = t;
  return pos;
}

Value embed_tokens(ModelCtx& ctx, const std::string& side,
                   const std::vector<std::int64_t>& ids, std::int64_t batch,
                   std::int64_t stride) {
  Value tok = ctx.tape.gather_rows(ctx.P(side + ".embed"), ids);
  Value pos = ctx.tape.gather_rows(ctx.P(side + ".pos"), position_ids(batch, stride));
  return ctx.tape.add(tok, pos);
}

Value attention_block(ModelCtx& ctx, const std::string& base, Value x_normed, Value kv_normed,
                      const SeqLayout& q_layout, const SeqLayout& kv_layout, bool causal) {
  Tape& t = ctx.tape;
  Value q = t.matmul(x_normed, ctx.P(base + ".wq"));
  Value k = t.matmul(kv_normed, ctx.P(base + ".wk"));
  Value v = t.matmul(kv_normed, ctx.P(base + ".wv"));
  Value a = t.attention(q, k, v, q_layout, kv_layout,
                        static_cast<int>(ctx.params.config.num_heads), causal);
  return t.matmul(a, ctx.P(base + ".wo"));
}

Value ffn_block(ModelCtx& ctx, const std::string& base, Value x_normed) {
  Tape& t = ctx.tape;
  Value h = t.add_row_broadcast(t.matmul(x_normed, ctx.P(base + ".w1")), ctx.P(base + ".b1"));
  h = t.relu(h);
  return t.add_row_broadcast(t.matmul(h, ctx.P(base + ".w2")), ctx.P(base + ".b2"));
}

Value norm(ModelCtx& ctx, const std::string& base, Value x) {
  return ctx.tape.layer_norm(x, ctx.P(base + ".gain"), ctx.P(base + ".shift"));
}

Value encoder_stack(ModelCtx& ctx, const std::vector<std::int64_t>& src_ids,
                    const SeqLayout& layout) {
  Tape& t = ctx.tape;
  Value x = embed_tokens(ctx, "enc", src_ids, layout.batch, layout.stride);
  for (std::int64_t i = 0; i < ctx.params.config.num_layers; ++i) {
    const std::string L = "enc.L" + std::to_string(i);
    Value n1 = norm(ctx, L + ".ln1", x);
    x = t.add(x, attention_block(ctx, L + ".attn", n1, n1, layout, layout, false));
    x = t.add(x, ffn_block(ctx, L + ".ffn", norm(ctx, L + ".ln2", x)));
  }
  return norm(ctx, "enc.ln_out", x);
}

Value decoder_stack(ModelCtx& ctx, const std::vector<std::int64_t>& dec_ids,
                    const SeqLayout& dec_layout, Value enc_out, const SeqLayout& enc_layout) {
  Tape& t = ctx.tape;
  Value y = embed_tokens(ctx, "dec", dec_ids, dec_layout.batch, dec_layout.stride);
  for (std::int64_t i = 0; i < ctx.params.config.num_layers; ++i) {
    const std::string L = "dec.L" + std::to_string(i);
    Value n1 = norm(ctx, L + ".ln1", y);
    y = t.add(y, attention_block(ctx, L + ".self", n1, n1, dec_layout, dec_layout, true));
    Value ca = attention_block(ctx, L + ".cross", norm(ctx, L + ".ln2", y), enc_out,
                               dec_layout, enc_layout, false);
    y = t.add(y, ca);
    y = t.add(y, ffn_block(ctx, L + ".ffn", norm(ctx, L + ".ln3", y)));
  }
  y = norm(ctx, "dec.ln_out", y);
  Value logits = t.add_row_broadcast(t.matmul(y, ctx.P("out.proj")), ctx.P("out.bias"));
  return t.log_softmax_rows(logits);
}

void check_ids(const std::vector<std::int64_t>& ids, std::int64_t vocab_size,
               const char* what) {
  for (std::int64_t id : ids)
    if (id < 0 || id >= vocab_size)
      throw InputError(std::string(what) + " index " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(vocab_size));
}

}  // namespace

ForwardGraph build_forward(Tape& tape, const ModelParams& params, const Batch& batch,
                           bool with_grad) {
  params.config.validate();
  if (batch.batch_size < 1) throw InputError("forward: empty batch");
  if (batch.tgt_len < 2)
    throw InputError("forward: target rows must hold at least bos and eos");
  for (std::int64_t len : batch.tgt_lens)
    if (len < 2) throw InputError("forward: target sentence shorter than bos+eos");
  if (batch.src_len > params.config.max_positions ||
      batch.tgt_len - 1 > params.config.max_positions)
    throw InputError("forward: sequence length exceeds max_positions");
  check_ids(batch.source, params.config.vocab_size, "source");
  check_ids(batch.target, params.config.vocab_size, "target");

  ModelCtx ctx{tape, params, with_grad, {}};

  SeqLayout enc_layout{batch.batch_size, batch.src_len, batch.src_lens};
  Value enc_out = encoder_stack(ctx, batch.source, enc_layout);

  const std::int64_t Td = batch.tgt_len - 1;
  SeqLayout dec_layout{batch.batch_size, Td, {}};
  dec_layout.lens.reserve(batch.batch_size);
  for (std::int64_t len : batch.tgt_lens) dec_layout.lens.push_back(len - 1);

  std::vector<std::int64_t> dec_ids(batch.batch_size * Td, Vocabulary::kPad);
  ForwardGraph g;
  g.labels.assign(batch.batch_size * Td, Vocabulary::kPad);
  g.weights.assign(batch.batch_size * Td, 0.0);
  for (std::int64_t i = 0; i < batch.batch_size; ++i) {
    for (std::int64_t t = 0; t < Td; ++t) {
      dec_ids[i * Td + t] = batch.tgt_at(i, t);
      if (t < batch.tgt_lens[i] - 1) {
        g.labels[i * Td + t] = batch.tgt_at(i, t + 1);
        g.weights[i * Td + t] = 1.0;
      }
    }
  }

  g.logprobs = decoder_stack(ctx, dec_ids, dec_layout, enc_out, enc_layout);
  g.layout = dec_layout;
  if (with_grad) g.params = std::move(ctx.values);
  return g;
}

ForwardResult forward(const ModelParams& params, const Batch& batch) {
  Tape tape;
  ForwardGraph g = build_forward(tape, params, batch, false);
  ForwardResult r;
  r.logprobs = tape.data(g.logprobs);
  r.layout = g.layout;
  r.labels = std::move(g.labels);
  r.weights = std::move(g.weights);
  return r;
}

EncodedSource encode_source(const ModelParams& params,
                            const std::vector<std::int64_t>& src_ids) {
  params.config.validate();
  if (src_ids.empty()) throw InputError("encode_source: empty source");
  if (static_cast<std::int64_t>(src_ids.size()) > params.config.max_positions)
    throw InputError("encode_source: source exceeds max_positions");
  check_ids(src_ids, params.config.vocab_size, "source");
  Tape tape;
  ModelCtx ctx{tape, params, false, {}};
  const std::int64_t len = static_cast<std::int64_t>(src_ids.size());
  SeqLayout layout{1, len, {len}};
  Value enc_out = encoder_stack(ctx, src_ids, layout);
  return EncodedSource{tape.data(enc_out)};
}

Tensor prefix_logprobs(const ModelParams& params, const EncodedSource& source,
                       const std::vector<std::int64_t>& prefix) {
  params.config.validate();
  if (prefix.empty()) throw InputError("prefix_logprobs: empty prefix");
  if (static_cast<std::int64_t>(prefix.size()) > params.config.max_positions)
    throw InputError("prefix_logprobs: prefix exceeds max_positions");
  check_ids(prefix, params.config.vocab_size, "prefix");
  if (source.states.cols() != params.config.embed_dim)
    throw ShapeError("prefix_logprobs: encoder states do not match embed_dim");
  Tape tape;
  ModelCtx ctx{tape, params, false, {}};
  const std::int64_t len = static_cast<std::int64_t>(prefix.size());
  SeqLayout dec_layout{1, len, {len}};
  const std::int64_t src_rows = source.states.rows();
  SeqLayout enc_layout{1, src_rows, {src_rows}};
  Value enc = tape.constant_ref(source.states);
  Value lp = decoder_stack(ctx, prefix, dec_layout, enc, enc_layout);
  return tape.data(lp);
}

}  // namespace idda
