#pragma once

#include <cmath>
#include <vector>

#include "v6forge/autodiff.hpp"

namespace v6forge::num {

/// Additive causal mask: 0 at or below the diagonal, -1e30 above. The
/// masked logits underflow to exactly zero weight after softmax.
inline Tensor causal_mask(int len) {
  if (len <= 0) throw ParamError("mask length must be positive");
  Tensor m({len, len});
  for (int i = 0; i < len; ++i)
    for (int j = i + 1; j < len; ++j) m.at(i, j) = -1e30;
  return m;
}

/// Sinusoidal positional encodings for positions offset..offset+len-1.
inline Tensor sinusoidal_pe(int len, int dim, int offset = 0) {
  if (len <= 0 || dim <= 0) throw ParamError("positional encoding dims must be positive");
  Tensor pe({len, dim});
  for (int p = 0; p < len; ++p) {
    for (int i = 0; i < dim; i += 2) {
      const double angle = (p + offset) / std::pow(10000.0, static_cast<double>(i) / dim);
      pe.at(p, i) = std::sin(angle);
      if (i + 1 < dim) pe.at(p, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

struct AttentionOpts {
  const Tensor* mask = nullptr;       // additive, (Lq, Lk)
  double dropout_rate = 0.0;          // applied to the attention weights
  rng::Engine* eng = nullptr;
  std::vector<Tensor>* weights_out = nullptr;  // post-softmax weights, appended
};

/// Scaled dot-product attention. Accepts (L, d) or batched (B, L, d)
/// operands; keys and values must agree on their sequence length.
inline Var attention(const Var& q, const Var& k, const Var& v, const AttentionOpts& opts = {}) {
  const int rank = q->value.rank();
  if (rank != k->value.rank() || rank != v->value.rank() || (rank != 2 && rank != 3))
    throw ShapeError("attention operands must share rank 2 or 3");
  Var q3 = q, k3 = k, v3 = v;
  if (rank == 2) {
    q3 = reshape(q, {1, q->value.dim(0), q->value.dim(1)});
    k3 = reshape(k, {1, k->value.dim(0), k->value.dim(1)});
    v3 = reshape(v, {1, v->value.dim(0), v->value.dim(1)});
  }
  const int dk = q3->value.dim(2);
  if (k3->value.dim(2) != dk)
    throw ShapeError("query/key depth mismatch: " + shape_text(q->value.shape()) + " vs " +
                     shape_text(k->value.shape()));
  if (k3->value.dim(1) != v3->value.dim(1))
    throw ShapeError("key/value length mismatch: " + shape_text(k->value.shape()) + " vs " +
                     shape_text(v->value.shape()));
  if (q3->value.dim(0) != k3->value.dim(0) || q3->value.dim(0) != v3->value.dim(0))
    throw ShapeError("attention batch sizes disagree");
  if (opts.mask) {
    if (opts.mask->rank() != 2 || opts.mask->dim(0) != q3->value.dim(1) ||
        opts.mask->dim(1) != k3->value.dim(1))
      throw ShapeError("mask shape " + shape_text(opts.mask->shape()) + " does not fit scores");
  }

  Var scores = scale(bmm_nt(q3, k3), 1.0 / std::sqrt(static_cast<double>(dk)));
  if (opts.mask) scores = add_tensor(scores, *opts.mask);
  Var w = softmax_lastdim(scores);
  if (opts.weights_out) opts.weights_out->push_back(w->value);
  if (opts.dropout_rate > 0.0) {
    if (!opts.eng) throw ParamError("attention dropout requires an engine");
    w = dropout(w, opts.dropout_rate, *opts.eng);
  }
  Var out = bmm(w, v3);
  if (rank == 2) out = reshape(out, {out->value.dim(1), out->value.dim(2)});
  return out;
}

/// Projection weights for one multi-head block; all heads share the four
/// (d_model, d_model) matrices, sliced per head. No biases.
struct MultiHeadParams {
  Parameter wq, wk, wv, wo;

  MultiHeadParams() = default;

  MultiHeadParams(const std::string& prefix, int d_model, rng::Engine& eng) {
    const double s = std::sqrt(3.0 / d_model);
    wq = Parameter(prefix + ".wq", Tensor::uniform({d_model, d_model}, -s, s, eng));
    wk = Parameter(prefix + ".wk", Tensor::uniform({d_model, d_model}, -s, s, eng));
    wv = Parameter(prefix + ".wv", Tensor::uniform({d_model, d_model}, -s, s, eng));
    wo = Parameter(prefix + ".wo", Tensor::uniform({d_model, d_model}, -s, s, eng));
  }

  std::vector<Parameter*> parameters() { return {&wq, &wk, &wv, &wo}; }
};

/// Multi-head attention: project, split into `heads` slices, attend per
/// head, concatenate, project with wo.
inline Var multi_head(Graph& g, const Var& q, const Var& k, const Var& v, MultiHeadParams& p,
                      int heads, const AttentionOpts& opts = {}) {
  const int d_model = q->value.last();
  if (heads <= 0 || d_model % heads != 0)
    throw ParamError("heads " + std::to_string(heads) + " must divide d_model " +
                     std::to_string(d_model));
  const int dk = d_model / heads;
  Var qp = matmul(q, g.param(p.wq));
  Var kp = matmul(k, g.param(p.wk));
  Var vp = matmul(v, g.param(p.wv));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_lastdim(qp, h * dk, dk);
    Var kh = slice_lastdim(kp, h * dk, dk);
    Var vh = slice_lastdim(vp, h * dk, dk);
    outs.push_back(attention(qh, kh, vh, opts));
  }
  return matmul(concat_lastdim(outs), g.param(p.wo));
}

}  // namespace v6forge::num
