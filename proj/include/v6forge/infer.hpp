// Tape-free inference for the trained transformer.
//
// Generation decodes one position at a time, re-feeding each predicted
// vector as the next decoder input. Running the full tape for every step
// would redo all previous positions, so DecoderSession keeps per-layer
// key/value caches and advances in O(one position) per step. Its output
// matches the autodiff forward pass to floating-point noise.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "v6forge/errors.hpp"
#include "v6forge/lm.hpp"
#include "v6forge/nn.hpp"
#include "v6forge/tensor.hpp"

namespace v6forge::infer {

namespace detail {

using num::EMat;

inline Eigen::Map<const EMat> as_mat(const num::Tensor& t) {
  int lead = 1;
  for (int i = 0; i + 1 < t.rank(); ++i) lead *= t.dim(i);
  return Eigen::Map<const EMat>(t.data(), lead, t.dim(t.rank() - 1));
}

inline Eigen::RowVectorXd as_row(const num::Tensor& t) {
  return Eigen::Map<const Eigen::RowVectorXd>(t.data(), static_cast<Eigen::Index>(t.values().size()));
}

/// x · W for a single row. Eigen routes one-row products through its
/// matrix-vector kernel, whose fused-multiply-add peeling depends on runtime
/// pointer alignment; this fixed-order version always reproduces itself.
inline Eigen::RowVectorXd row_times_mat(const Eigen::RowVectorXd& x, const num::Tensor& w) {
  const Eigen::Index rows = w.dim(0);
  const Eigen::Index cols = w.dim(1);
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double xi = x[i];
    const double* wr = w.data() + i * cols;
    for (Eigen::Index j = 0; j < cols; ++j) out[j] += xi * wr[j];
  }
  return out;
}

// Reductions here use the same fixed-order scalar accumulation as the
// training ops (see autodiff), so a step reproduces the tape forward pass
// bit for bit given identical inputs.

/// y = layer_norm(x) * gain + bias over the last (only) dimension.
inline Eigen::RowVectorXd layer_norm_row(const Eigen::RowVectorXd& x,
                                         const Eigen::RowVectorXd& gain,
                                         const Eigen::RowVectorXd& bias) {
  const Eigen::Index n = x.size();
  const double mean = num::detail::sum_n(x.data(), n) / static_cast<double>(n);
  double var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= static_cast<double>(n);
  const double s = std::sqrt(var + 1e-5);
  Eigen::RowVectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = (x[i] - mean) / s * gain[i] + bias[i];
  return out;
}

/// softmax(q·Kᵀ/√dk)·V for a single query row; K and V hold one row per
/// attendable position.
inline Eigen::RowVectorXd attend_row(const Eigen::RowVectorXd& q, const EMat& k, const EMat& v) {
  const Eigen::Index n = k.rows();
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.size()));
  Eigen::VectorXd w(n);
  for (Eigen::Index r = 0; r < n; ++r)
    w[r] = num::detail::dot_n(q.data(), k.data() + r * k.cols(), q.size()) * inv;
  const double m = num::detail::max_n(w.data(), n);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    w[r] = std::exp(w[r] - m);
    sum += w[r];
  }
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(v.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const double wr = w[r] / sum;
    for (Eigen::Index c = 0; c < v.cols(); ++c) out[c] += wr * v(r, c);
  }
  return out;
}

}  // namespace detail

/// Runs the encoder stack on one 16-row prefix (raw embedding vectors) in
/// eval mode and returns the (enc_len, d_model) memory.
inline num::Tensor encode_memory(lm::Transformer& model, const num::Tensor& prefix_rows) {
  const lm::ModelConfig& cfg = model.config();
  if (prefix_rows.rank() != 2 || prefix_rows.dim(0) != cfg.enc_len ||
      prefix_rows.dim(1) != cfg.d_model)
    throw ShapeError("prefix rows must be (" + std::to_string(cfg.enc_len) + "," +
                     std::to_string(cfg.d_model) + ")");
  num::Graph g;
  num::Tensor batched({1, cfg.enc_len, cfg.d_model},
                      {prefix_rows.values().begin(), prefix_rows.values().end()});
  num::Var mem = model.encode(g, g.constant(std::move(batched)));
  return num::Tensor({cfg.enc_len, cfg.d_model},
                     {mem->value.values().begin(), mem->value.values().end()});
}

/// Incremental decoder with per-layer key/value caches. Feed raw input
/// vectors (the learned start vector first, then each predicted output) and
/// read back one output row per step.
class DecoderSession {
 public:
  DecoderSession(lm::Transformer& model, const num::Tensor& memory)
      : model_(&model), cfg_(model.config()) {
    if (memory.rank() != 2 || memory.dim(0) != cfg_.enc_len || memory.dim(1) != cfg_.d_model)
      throw ShapeError("memory must be (" + std::to_string(cfg_.enc_len) + "," +
                       std::to_string(cfg_.d_model) + ")");
    const detail::EMat mem = detail::as_mat(memory);
    layers_.resize(model.decoder_layers().size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      lm::DecoderLayer& src = model.decoder_layers()[l];
      LayerCache& c = layers_[l];
      c.cross_k = mem * detail::as_mat(src.cross_attn.wk.value);
      c.cross_v = mem * detail::as_mat(src.cross_attn.wv.value);
      c.self_k.resize(0, cfg_.d_model);
      c.self_v.resize(0, cfg_.d_model);
    }
  }

  int position() const { return position_; }

  /// Advances one position. `raw` is the un-scaled input vector for this
  /// position; returns the model output row for it.
  std::vector<double> step(std::span<const double> raw) {
    if (raw.size() != static_cast<std::size_t>(cfg_.d_model))
      throw ShapeError("decoder input must have " + std::to_string(cfg_.d_model) + " values");
    if (position_ >= cfg_.dec_len) throw StateError("decoder already produced a full sequence");
    const int d = cfg_.d_model;
    const int dk = cfg_.head_dim();

    Eigen::RowVectorXd x =
        Eigen::Map<const Eigen::RowVectorXd>(raw.data(), d) * std::sqrt(static_cast<double>(d));
    if (cfg_.positional_encoding) {
      const num::Tensor pe = num::sinusoidal_pe(1, d, cfg_.enc_len + position_);
      x += detail::as_row(pe);
    }

    for (std::size_t l = 0; l < layers_.size(); ++l) {
      lm::DecoderLayer& p = model_->decoder_layers()[l];
      LayerCache& c = layers_[l];

      // Self-attention over everything fed so far (the causal row).
      {
        const Eigen::RowVectorXd q = detail::row_times_mat(x, p.self_attn.wq.value);
        const Eigen::Index rows = c.self_k.rows();
        c.self_k.conservativeResize(rows + 1, Eigen::NoChange);
        c.self_v.conservativeResize(rows + 1, Eigen::NoChange);
        c.self_k.row(rows) = detail::row_times_mat(x, p.self_attn.wk.value);
        c.self_v.row(rows) = detail::row_times_mat(x, p.self_attn.wv.value);
        Eigen::RowVectorXd heads(d);
        for (int h = 0; h < cfg_.heads; ++h)
          heads.segment(h * dk, dk) = detail::attend_row(
              q.segment(h * dk, dk), c.self_k.middleCols(h * dk, dk), c.self_v.middleCols(h * dk, dk));
        const Eigen::RowVectorXd a = detail::row_times_mat(heads, p.self_attn.wo.value);
        x = detail::layer_norm_row(x + a, detail::as_row(p.ln1.gain.value),
                                   detail::as_row(p.ln1.bias.value));
      }

      // Cross-attention over the cached encoder memory projections.
      {
        const Eigen::RowVectorXd q = detail::row_times_mat(x, p.cross_attn.wq.value);
        Eigen::RowVectorXd heads(d);
        for (int h = 0; h < cfg_.heads; ++h)
          heads.segment(h * dk, dk) = detail::attend_row(
              q.segment(h * dk, dk), c.cross_k.middleCols(h * dk, dk), c.cross_v.middleCols(h * dk, dk));
        const Eigen::RowVectorXd a = detail::row_times_mat(heads, p.cross_attn.wo.value);
        x = detail::layer_norm_row(x + a, detail::as_row(p.ln2.gain.value),
                                   detail::as_row(p.ln2.bias.value));
      }

      // Feed-forward.
      {
        Eigen::RowVectorXd h = detail::row_times_mat(x, p.ff.w1.value) + detail::as_row(p.ff.b1.value);
        h = h.cwiseMax(0.0);
        const Eigen::RowVectorXd y =
            detail::row_times_mat(h, p.ff.w2.value) + detail::as_row(p.ff.b2.value);
        x = detail::layer_norm_row(x + y, detail::as_row(p.ln3.gain.value),
                                   detail::as_row(p.ln3.bias.value));
      }
    }

    Eigen::RowVectorXd out =
        detail::row_times_mat(x, model_->out_w().value) + detail::as_row(model_->out_b().value);
    if (cfg_.output_activation == lm::OutputActivation::sigmoid)
      for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    ++position_;
    return {out.data(), out.data() + out.size()};
  }

 private:
  struct LayerCache {
    detail::EMat self_k, self_v;    // grows one row per step
    detail::EMat cross_k, cross_v;  // fixed (enc_len, d)
  };

  lm::Transformer* model_;
  lm::ModelConfig cfg_;
  std::vector<LayerCache> layers_;
  int position_ = 0;
};

}  // namespace v6forge::infer
