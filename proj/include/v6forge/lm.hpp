#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>


#include "v6forge/addr.hpp"
#include "v6forge/embed.hpp"
#include "v6forge/nn.hpp"
#include "v6forge/optim.hpp"

namespace v6forge::lm {

enum class OutputActivation { linear, sigmoid };

inline std::string to_string(OutputActivation a) {
  return a == OutputActivation::linear ? "linear" : "sigmoid";
}

inline OutputActivation parse_output_activation(const std::string& s) {
  if (s == "linear") return OutputActivation::linear;
  if (s == "sigmoid") return OutputActivation::sigmoid;
  throw ParamError("unknown output activation \"" + s + "\"");
}

struct ModelConfig {
  int layers = 6;
  int heads = 10;
  int d_model = 100;
  int ff_width = 400;
  int enc_len = 16;
  int dec_len = 16;
  double dropout = 0.1;
  bool positional_encoding = true;
  OutputActivation output_activation = OutputActivation::linear;

  int head_dim() const { return d_model / heads; }

  void validate() const {
    if (layers <= 0) throw ParamError("layers must be positive");
    if (heads <= 0) throw ParamError("heads must be positive");
    if (d_model <= 0) throw ParamError("d_model must be positive");
    if (d_model % heads != 0)
      throw ParamError("heads " + std::to_string(heads) + " must divide d_model " +
                       std::to_string(d_model));
    if (ff_width <= 0) throw ParamError("ff_width must be positive");
    if (enc_len <= 0 || dec_len <= 0) throw ParamError("sequence lengths must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ParamError("dropout must be in [0,1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

struct LayerNormParams {
  num::Parameter gain, bias;

  LayerNormParams() = default;
  LayerNormParams(const std::string& prefix, int d)
      : gain(prefix + ".gain", num::Tensor::full({d}, 1.0)),
        bias(prefix + ".bias", num::Tensor({d})) {}

  std::vector<num::Parameter*> parameters() { return {&gain, &bias}; }
};

struct FeedForwardParams {
  num::Parameter w1, b1, w2, b2;

  FeedForwardParams() = default;
  FeedForwardParams(const std::string& prefix, int d, int width, rng::Engine& eng) {
    const double s1 = std::sqrt(6.0 / (d + width));
    w1 = num::Parameter(prefix + ".w1", num::Tensor::uniform({d, width}, -s1, s1, eng));
    b1 = num::Parameter(prefix + ".b1", num::Tensor({width}));
    w2 = num::Parameter(prefix + ".w2", num::Tensor::uniform({width, d}, -s1, s1, eng));
    b2 = num::Parameter(prefix + ".b2", num::Tensor({d}));
  }

  std::vector<num::Parameter*> parameters() { return {&w1, &b1, &w2, &b2}; }
};

struct EncoderLayer {
  num::MultiHeadParams attn;
  LayerNormParams ln1;
  FeedForwardParams ff;
  LayerNormParams ln2;

  EncoderLayer() = default;
  EncoderLayer(const std::string& prefix, const ModelConfig& cfg, rng::Engine& eng)
      : attn(prefix + ".attn", cfg.d_model, eng),
        ln1(prefix + ".ln1", cfg.d_model),
        ff(prefix + ".ff", cfg.d_model, cfg.ff_width, eng),
        ln2(prefix + ".ln2", cfg.d_model) {}

  std::vector<num::Parameter*> parameters() {
    std::vector<num::Parameter*> out = attn.parameters();
    for (auto* p : ln1.parameters()) out.push_back(p);
    for (auto* p : ff.parameters()) out.push_back(p);
    for (auto* p : ln2.parameters()) out.push_back(p);
    return out;
  }
};

struct DecoderLayer {
  num::MultiHeadParams self_attn;
  LayerNormParams ln1;
  num::MultiHeadParams cross_attn;
  LayerNormParams ln2;
  FeedForwardParams ff;
  LayerNormParams ln3;

  DecoderLayer() = default;
  DecoderLayer(const std::string& prefix, const ModelConfig& cfg, rng::Engine& eng)
      : self_attn(prefix + ".self_attn", cfg.d_model, eng),
        ln1(prefix + ".ln1", cfg.d_model),
        cross_attn(prefix + ".cross_attn", cfg.d_model, eng),
        ln2(prefix + ".ln2", cfg.d_model),
        ff(prefix + ".ff", cfg.d_model, cfg.ff_width, eng),
        ln3(prefix + ".ln3", cfg.d_model) {}

  std::vector<num::Parameter*> parameters() {
    std::vector<num::Parameter*> out = self_attn.parameters();
    for (auto* p : ln1.parameters()) out.push_back(p);
    for (auto* p : cross_attn.parameters()) out.push_back(p);
    for (auto* p : ln2.parameters()) out.push_back(p);
    for (auto* p : ff.parameters()) out.push_back(p);
    for (auto* p : ln3.parameters()) out.push_back(p);
    return out;
  }
};

/// Per-layer, per-head attention weights captured during a forward pass.
struct AttentionTrace {
  std::vector<std::vector<num::Tensor>> encoder_self;
  std::vector<std::vector<num::Tensor>> decoder_self;
  std::vector<std::vector<num::Tensor>> decoder_cross;
};

struct ForwardOpts {
  bool training = false;
  rng::Engine* dropout_eng = nullptr;
  AttentionTrace* trace = nullptr;
};

/// Post-layer-norm encoder/decoder transformer over word vectors. Inputs
/// are raw embedding vectors; the model scales them by sqrt(d_model) and
/// adds sinusoidal positions (decoder positions continue after the encoder).
class Transformer {
 public:
  Transformer() = default;

  Transformer(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    rng::Engine eng = rng::engine(seed, 0x7f0de1);
    enc_.reserve(static_cast<std::size_t>(cfg_.layers));
    dec_.reserve(static_cast<std::size_t>(cfg_.layers));
    for (int l = 0; l < cfg_.layers; ++l)
      enc_.emplace_back("enc." + std::to_string(l), cfg_, eng);
    for (int l = 0; l < cfg_.layers; ++l)
      dec_.emplace_back("dec." + std::to_string(l), cfg_, eng);
    const double s = std::sqrt(3.0 / cfg_.d_model);
    out_w_ = num::Parameter("out.w", num::Tensor::uniform({cfg_.d_model, cfg_.d_model}, -s, s, eng));
    out_b_ = num::Parameter("out.b", num::Tensor({cfg_.d_model}));
    start_ = num::Parameter("start", num::Tensor::uniform({cfg_.d_model}, -s, s, eng));
  }

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t init_seed() const { return seed_; }
  std::span<const double> start_vector() const { return start_.value.values(); }
  num::Parameter& start_param() { return start_; }
  std::vector<EncoderLayer>& encoder_layers() { return enc_; }
  std::vector<DecoderLayer>& decoder_layers() { return dec_; }
  num::Parameter& out_w() { return out_w_; }
  num::Parameter& out_b() { return out_b_; }

  /// All parameters in checkpoint order.
  std::vector<num::Parameter*> parameters() {
    std::vector<num::Parameter*> out;
    for (auto& l : enc_)
      for (auto* p : l.parameters()) out.push_back(p);
    for (auto& l : dec_)
      for (auto* p : l.parameters()) out.push_back(p);
    out.push_back(&out_w_);
    out.push_back(&out_b_);
    out.push_back(&start_);
    return out;
  }

  /// Encoder stack over raw word vectors (B, enc_len, d).
  num::Var encode(num::Graph& g, const num::Var& enc_in, const ForwardOpts& opts = {}) {
    check_input(enc_in, cfg_.enc_len, "encoder");
    num::Var x = prepare(g, enc_in, 0);
    for (auto& layer : enc_) {
      num::AttentionOpts aopts = attn_opts(opts, opts.trace ? &opts.trace->encoder_self : nullptr);
      num::Var a = num::multi_head(g, x, x, x, layer.attn, cfg_.heads, aopts);
      x = num::layer_norm(num::add(x, a), g.param(layer.ln1.gain), g.param(layer.ln1.bias));
      x = num::layer_norm(num::add(x, feed_forward(g, x, layer.ff, opts)),
                          g.param(layer.ln2.gain), g.param(layer.ln2.bias));
    }
    return x;
  }

  /// Decoder stack; dec_in holds raw vectors (B, dec_len, d), causally
  /// masked so position i sees only inputs 0..i plus the encoder memory.
  num::Var decode(num::Graph& g, const num::Var& memory, const num::Var& dec_in,
                  const ForwardOpts& opts = {}) {
    check_input(dec_in, cfg_.dec_len, "decoder");
    if (memory->value.rank() != 3 || memory->value.dim(0) != dec_in->value.dim(0) ||
        memory->value.dim(2) != cfg_.d_model)
      throw ShapeError("memory shape " + num::shape_text(memory->value.shape()) +
                       " does not match decoder input");
    const num::Tensor mask = num::causal_mask(cfg_.dec_len);
    num::Var x = prepare(g, dec_in, cfg_.enc_len);
    for (auto& layer : dec_) {
      num::AttentionOpts self_opts = attn_opts(opts, opts.trace ? &opts.trace->decoder_self : nullptr);
      self_opts.mask = &mask;
      num::Var a = num::multi_head(g, x, x, x, layer.self_attn, cfg_.heads, self_opts);
      x = num::layer_norm(num::add(x, a), g.param(layer.ln1.gain), g.param(layer.ln1.bias));
      num::AttentionOpts cross_opts = attn_opts(opts, opts.trace ? &opts.trace->decoder_cross : nullptr);
      num::Var c = num::multi_head(g, x, memory, memory, layer.cross_attn, cfg_.heads, cross_opts);
      x = num::layer_norm(num::add(x, c), g.param(layer.ln2.gain), g.param(layer.ln2.bias));
      x = num::layer_norm(num::add(x, feed_forward(g, x, layer.ff, opts)),
                          g.param(layer.ln3.gain), g.param(layer.ln3.bias));
    }
    return output_head(g, x);
  }

  /// Full pass: encode, then decode teacher-forced inputs.
  num::Var forward(num::Graph& g, const num::Var& enc_in, const num::Var& dec_in,
                   const ForwardOpts& opts = {}) {
    return decode(g, encode(g, enc_in, opts), dec_in, opts);
  }

  /// Teacher-forced decoder input: the learned start vector followed by
  /// target rows 0..dec_len-2.
  num::Var teacher_inputs(num::Graph& g, const num::Tensor& target) {
    if (target.rank() != 3 || target.dim(1) != cfg_.dec_len || target.dim(2) != cfg_.d_model)
      throw ShapeError("target shape " + num::shape_text(target.shape()) + " invalid");
    const int b = target.dim(0);
    num::Var head = num::reshape(num::tile_rows(g.param(start_), b), {b, 1, cfg_.d_model});
    num::Tensor tail({b, cfg_.dec_len - 1, cfg_.d_model});
    for (int i = 0; i < b; ++i)
      tail.slab(i) = target.slab(i).topRows(cfg_.dec_len - 1);
    return num::concat_axis1(head, g.constant(std::move(tail)));
  }

 private:
  void check_input(const num::Var& x, int len, const char* what) const {
    if (x->value.rank() != 3 || x->value.dim(1) != len || x->value.dim(2) != cfg_.d_model)
      throw ShapeError(std::string(what) + " input shape " + num::shape_text(x->value.shape()) +
                       " must be (B," + std::to_string(len) + "," + std::to_string(cfg_.d_model) + ")");
  }

  num::AttentionOpts attn_opts(const ForwardOpts& opts, std::vector<std::vector<num::Tensor>>* sink) {
    num::AttentionOpts a;
    if (opts.training && cfg_.dropout > 0.0) {
      a.dropout_rate = cfg_.dropout;
      a.eng = opts.dropout_eng;
      if (!a.eng) throw ParamError("training forward requires a dropout engine");
    }
    if (sink) {
      sink->emplace_back();
      a.weights_out = &sink->back();
    }
    return a;
  }

  num::Var prepare(num::Graph& g, const num::Var& x, int pe_offset) {
    num::Var out = num::scale(x, std::sqrt(static_cast<double>(cfg_.d_model)));
    if (cfg_.positional_encoding)
      out = num::add_tensor(out, num::sinusoidal_pe(x->value.dim(1), cfg_.d_model, pe_offset));
    return out;
  }

  num::Var feed_forward(num::Graph& g, const num::Var& x, FeedForwardParams& ff,
                        const ForwardOpts& opts) {
    num::Var h = num::relu(num::add_bias(num::matmul(x, g.param(ff.w1)), g.param(ff.b1)));
    if (opts.training && cfg_.dropout > 0.0) h = num::dropout(h, cfg_.dropout, *opts.dropout_eng);
    return num::add_bias(num::matmul(h, g.param(ff.w2)), g.param(ff.b2));
  }

  num::Var output_head(num::Graph& g, const num::Var& x) {
    num::Var y = num::add_bias(num::matmul(x, g.param(out_w_)), g.param(out_b_));
    if (cfg_.output_activation == OutputActivation::sigmoid) y = num::sigmoid(y);
    return y;
  }

  ModelConfig cfg_;
  std::uint64_t seed_ = 0;
  std::vector<EncoderLayer> enc_;
  std::vector<DecoderLayer> dec_;
  num::Parameter out_w_, out_b_, start_;
};

/// Plain cosine distance between two vectors; both must be nonzero.
inline double cosine_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ShapeError("cosine_loss length mismatch");
  const double np = num::norm(pred);
  const double nt = num::norm(target);
  if (np < 1e-12) throw NormError("prediction vector has zero norm");
  if (nt < 1e-12) throw NormError("target vector has zero norm");
  return 1.0 - num::dot(pred, target) / std::max(np * nt, 1e-12);
}

/// Encoder inputs (words 0..15) and targets (words 16..31) as embedding
/// vectors.
struct SequenceBatch {
  num::Tensor enc;     // (B, enc_len, d)
  num::Tensor target;  // (B, dec_len, d)

  int size() const { return enc.rank() == 3 ? enc.dim(0) : 0; }
};

inline SequenceBatch make_batch(std::span<const addr::WordSequence> seqs,
                                const embed::EmbeddingTable& table) {
  if (seqs.empty()) throw EmptyCorpusError("cannot build a batch from zero sequences");
  const int b = static_cast<int>(seqs.size());
  const int d = table.dim();
  SequenceBatch batch{num::Tensor({b, 16, d}), num::Tensor({b, 16, d})};
  for (int i = 0; i < b; ++i) {
    for (int p = 0; p < 32; ++p) {
      const auto row = table.row(table.vocabulary().id_of(seqs[static_cast<std::size_t>(i)].word(p)));
      num::Tensor& dst = p < 16 ? batch.enc : batch.target;
      const int r = p < 16 ? p : p - 16;
      for (int j = 0; j < d; ++j) dst.at(i, r, j) = row[static_cast<std::size_t>(j)];
    }
  }
  return batch;
}

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  int batch = 64;
  std::uint64_t seed = 1;
  int threads = 1;
  int max_train_seqs = 1024;  // 0 = use every sequence
  double val_fraction = 0.05;
  bool fine_tune_embeddings = false;
  std::function<void(int, double, double)> progress;  // epoch, train loss, val loss (nan if none)
};

struct TrainLog {
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // nan entries when no validation split
  int train_count = 0;
  int val_count = 0;
};

namespace detail {

/// Word-id view of the selected sequences plus a row materializer. With
/// frozen embeddings the rows come from the fixed table; when fine-tuning
/// they are read from the live embedding parameter.
struct SeqData {
  std::vector<std::array<int, 32>> ids;  // one entry per selected sequence
  const num::Tensor* rows = nullptr;     // (V, d)
  int d = 0;

  void fill(num::Tensor& dst, int slab, std::size_t seq, int from, int len) const {
    for (int p = 0; p < len; ++p) {
      const double* src =
          rows->data() + static_cast<std::size_t>(ids[seq][static_cast<std::size_t>(from + p)]) *
                             static_cast<std::size_t>(d);
      std::copy(src, src + d, dst.data() + (static_cast<std::size_t>(slab) * dst.dim(1) + p) *
                                               static_cast<std::size_t>(d));
    }
  }

  num::Tensor stack(std::span<const std::size_t> slots, int from, int len) const {
    num::Tensor out({static_cast<int>(slots.size()), len, d});
    for (std::size_t i = 0; i < slots.size(); ++i) fill(out, static_cast<int>(i), slots[i], from, len);
    return out;
  }

  std::vector<int> flat_ids(std::span<const std::size_t> slots, int from, int len) const {
    std::vector<int> out;
    out.reserve(slots.size() * static_cast<std::size_t>(len));
    for (std::size_t slot : slots)
      for (int p = 0; p < len; ++p) out.push_back(ids[slot][static_cast<std::size_t>(from + p)]);
    return out;
  }
};

/// Mean cosine loss over the given slots, eval mode, batched.
inline double eval_loss(Transformer& model, const SeqData& data,
                        const std::vector<std::size_t>& slots, int batch) {
  double total = 0.0;
  for (std::size_t at = 0; at < slots.size(); at += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min(static_cast<std::size_t>(batch), slots.size() - at);
    const std::span<const std::size_t> part(slots.data() + at, n);
    num::Graph g;
    num::Tensor target = data.stack(part, 16, 16);
    num::Var pred =
        model.forward(g, g.constant(data.stack(part, 0, 16)), model.teacher_inputs(g, target));
    total += num::cosine_distance_mean(pred, std::move(target))->value.item() * static_cast<double>(n);
  }
  return total / static_cast<double>(slots.size());
}

}  // namespace detail

/// Trains the transformer with teacher forcing. Embeddings are frozen by
/// default; with fine_tune_embeddings the table rows become a trainable
/// parameter (targets stay detached snapshots) and `tuned` receives the
/// updated table. One optimizer step per batch; shard gradients merge in
/// shard order, so a fixed (seed, threads) pair reproduces exactly.
inline Transformer train_lm(std::span<const addr::WordSequence> seeds,
                            const embed::EmbeddingTable& table, const ModelConfig& mcfg,
                            const TrainConfig& tcfg, TrainLog* log = nullptr,
                            embed::EmbeddingTable* tuned = nullptr) {
  if (seeds.empty()) throw EmptyCorpusError("no training sequences");
  if (tcfg.epochs <= 0) throw ParamError("epochs must be positive");
  if (tcfg.batch <= 0) throw ParamError("batch size must be positive");
  if (tcfg.threads <= 0) throw ParamError("threads must be positive");
  ModelConfig cfg = mcfg;
  cfg.validate();
  if (cfg.d_model != table.dim())
    throw ParamError("d_model " + std::to_string(cfg.d_model) +
                     " does not match embedding dim " + std::to_string(table.dim()));

  // Optional cap, then a seeded train/validation split over the selection.
  std::vector<std::size_t> pool(seeds.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  {
    rng::Engine eng = rng::engine(tcfg.seed, 0x5ab5a);
    rng::shuffle(pool, eng);
  }
  if (tcfg.max_train_seqs > 0 && pool.size() > static_cast<std::size_t>(tcfg.max_train_seqs))
    pool.resize(static_cast<std::size_t>(tcfg.max_train_seqs));

  num::Parameter emb("embedding", table.rows());
  detail::SeqData data;
  data.rows = &emb.value;
  data.d = cfg.d_model;
  data.ids.resize(pool.size());
  for (std::size_t slot = 0; slot < pool.size(); ++slot) {
    const auto& seq = seeds[pool[slot]];
    for (int p = 0; p < 32; ++p)
      data.ids[slot][static_cast<std::size_t>(p)] = table.vocabulary().id_of(seq.word(p));
  }

  std::size_t val_n = static_cast<std::size_t>(
      std::llround(tcfg.val_fraction * static_cast<double>(pool.size())));
  if (pool.size() - val_n < 1) val_n = 0;
  std::vector<std::size_t> train(pool.size() - val_n), val(val_n);
  for (std::size_t i = 0; i < train.size(); ++i) train[i] = i;
  for (std::size_t i = 0; i < val.size(); ++i) val[i] = train.size() + i;
  if (log) {
    log->train_count = static_cast<int>(train.size());
    log->val_count = static_cast<int>(val.size());
  }

  Transformer model(cfg, tcfg.seed);
  std::vector<num::Parameter*> params = model.parameters();
  if (tcfg.fine_tune_embeddings) params.push_back(&emb);
  num::Adam opt({.lr = tcfg.lr});

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    rng::Engine order_eng = rng::engine(tcfg.seed, 0xe90c4, static_cast<std::uint64_t>(epoch));
    rng::shuffle(train, order_eng);
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t at = 0; at < train.size(); at += static_cast<std::size_t>(tcfg.batch)) {
      const std::size_t n = std::min(static_cast<std::size_t>(tcfg.batch), train.size() - at);
      const int shards = std::min<int>(tcfg.threads, static_cast<int>(n));
      std::vector<num::Graph> graphs(static_cast<std::size_t>(shards));
      std::vector<double> shard_loss(static_cast<std::size_t>(shards), 0.0);
      std::vector<std::size_t> shard_size(static_cast<std::size_t>(shards), 0);

      auto run_shard = [&](int si) {
        const std::size_t lo = at + (n * static_cast<std::size_t>(si)) / static_cast<std::size_t>(shards);
        const std::size_t hi = at + (n * (static_cast<std::size_t>(si) + 1)) / static_cast<std::size_t>(shards);
        if (hi <= lo) return;
        shard_size[static_cast<std::size_t>(si)] = hi - lo;
        const std::span<const std::size_t> slots(train.data() + lo, hi - lo);
        num::Graph& g = graphs[static_cast<std::size_t>(si)];
        rng::Engine drop = rng::engine(tcfg.seed, 0xd709, static_cast<std::uint64_t>(epoch) * 1000003ull +
                                                             static_cast<std::uint64_t>(batch_index),
                                       static_cast<std::uint64_t>(si));
        ForwardOpts opts;
        opts.training = true;
        opts.dropout_eng = &drop;
        const int b = static_cast<int>(slots.size());
        num::Tensor target = data.stack(slots, 16, 16);  // detached snapshot
        num::Var enc_in, dec_in;
        if (tcfg.fine_tune_embeddings) {
          num::Var e = g.param(emb);
          enc_in = num::reshape(num::gather_rows(e, data.flat_ids(slots, 0, 16)), {b, 16, cfg.d_model});
          num::Var head = num::reshape(num::tile_rows(g.param(model.start_param()), b),
                                       {b, 1, cfg.d_model});
          num::Var tail = num::reshape(num::gather_rows(e, data.flat_ids(slots, 16, 15)),
                                       {b, 15, cfg.d_model});
          dec_in = num::concat_axis1(head, tail);
        } else {
          enc_in = g.constant(data.stack(slots, 0, 16));
          dec_in = model.teacher_inputs(g, target);
        }
        num::Var pred = model.decode(g, model.encode(g, enc_in, opts), dec_in, opts);
        num::Var loss = num::cosine_distance_mean(pred, std::move(target));
        shard_loss[static_cast<std::size_t>(si)] = loss->value.item();
        g.backward(loss);
      };

      if (shards == 1) {
        run_shard(0);
      } else {
        std::vector<std::thread> workers;
        for (int si = 0; si < shards; ++si) workers.emplace_back(run_shard, si);
        for (auto& w : workers) w.join();
      }

      for (num::Parameter* p : params) p->zero_grad();
      double batch_loss = 0.0;
      for (int si = 0; si < shards; ++si) {
        if (shard_size[static_cast<std::size_t>(si)] == 0) continue;
        const double w = static_cast<double>(shard_size[static_cast<std::size_t>(si)]) /
                         static_cast<double>(n);
        graphs[static_cast<std::size_t>(si)].accumulate_param_grads(w);
        batch_loss += shard_loss[static_cast<std::size_t>(si)] * w;
      }
      opt.step(params);
      epoch_loss += batch_loss * static_cast<double>(n);
      ++batch_index;
    }
    epoch_loss /= static_cast<double>(train.size());
    double vloss = std::numeric_limits<double>::quiet_NaN();
    if (!val.empty()) vloss = detail::eval_loss(model, data, val, tcfg.batch);
    if (log) {
      log->train_loss.push_back(epoch_loss);
      log->val_loss.push_back(vloss);
    }
    if (tcfg.progress) tcfg.progress(epoch, epoch_loss, vloss);
  }
  if (tuned && tcfg.fine_tune_embeddings)
    *tuned = embed::EmbeddingTable(table.vocabulary(), emb.value);
  return model;
}

/// Attention weights for one sequence through a model in eval mode.
inline AttentionTrace attention_dump(Transformer& model, const addr::WordSequence& seq,
                                     const embed::EmbeddingTable& table) {
  SequenceBatch batch = make_batch({&seq, 1}, table);
  AttentionTrace trace;
  ForwardOpts opts;
  opts.trace = &trace;
  num::Graph g;
  model.forward(g, g.constant(batch.enc), model.teacher_inputs(g, batch.target), opts);
  return trace;
}

}  // namespace v6forge::lm
