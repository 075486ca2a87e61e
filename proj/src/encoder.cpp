#include "cabkgc/encoder.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cabkgc/errors.hpp"

namespace cabkgc {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;    // 1/sqrt(2)
constexpr double kInvSqrt2Pi = 0.39894228040143267794;  // 1/sqrt(2*pi)

// y = xhat .* scale + shift with mean/variance taken over each row.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x,
                           const Eigen::MatrixXd& scale,
                           const Eigen::MatrixXd& shift,
                           Eigen::MatrixXd& xhat_out,
                           Eigen::VectorXd& inv_std_out) {
  const auto d = static_cast<double>(x.cols());
  Eigen::VectorXd mean = x.rowwise().mean();
  Eigen::MatrixXd centered = (x.array().colwise() - mean.array()).matrix();
  Eigen::VectorXd var =
      (centered.array().square().rowwise().sum() / d).matrix();
  inv_std_out = (var.array() + kLayerNormEps).rsqrt().matrix();
  xhat_out = (centered.array().colwise() * inv_std_out.array()).matrix();
  Eigen::ArrayXXd out = xhat_out.array().rowwise() * scale.row(0).array();
  out.rowwise() += shift.row(0).array();
  return out.matrix();
}

// Backward of layer_norm w.r.t. its input; accumulates into dscale/dshift.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy,
                                    const Eigen::MatrixXd& xhat,
                                    const Eigen::VectorXd& inv_std,
                                    const Eigen::MatrixXd& scale,
                                    Eigen::MatrixXd& dscale,
                                    Eigen::MatrixXd& dshift) {
  const auto d = static_cast<double>(xhat.cols());
  dscale.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dshift.row(0) += dy.colwise().sum();
  Eigen::MatrixXd dxhat =
      (dy.array().rowwise() * scale.row(0).array()).matrix();
  Eigen::VectorXd sum_dxhat = dxhat.rowwise().sum();
  Eigen::VectorXd sum_dxhat_xhat =
      (dxhat.array() * xhat.array()).rowwise().sum().matrix();
  // dx = inv_std/d * (d*dxhat - sum(dxhat) - xhat .* sum(dxhat .* xhat))
  Eigen::ArrayXXd dx = d * dxhat.array();
  dx.colwise() -= sum_dxhat.array();
  dx -= xhat.array().colwise() * sum_dxhat_xhat.array();
  dx.colwise() *= inv_std.array() / d;
  return dx.matrix();
}

Eigen::MatrixXd linear(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                       const Eigen::MatrixXd& b) {
  return (x * w).rowwise() + b.row(0);
}

Eigen::MatrixXd make_dropout_mask(Eigen::Index rows, Eigen::Index cols,
                                  double p, Rng& rng) {
  Eigen::MatrixXd mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      mask(r, c) = rng.uniform() < p ? 0.0 : keep_scale;
    }
  }
  return mask;
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Eigen::MatrixXd transformer_layer(const LayerParams& layer,
                                  const ModelConfig& cfg,
                                  const Eigen::MatrixXd& x,
                                  const std::vector<bool>& pad_mask,
                                  LayerCache* cache) {
  const Eigen::Index L = x.rows();
  const Eigen::Index d = cfg.d_model;
  const int heads = cfg.n_heads;
  const Eigen::Index dh = d / heads;
  if (x.cols() != d || pad_mask.size() != static_cast<std::size_t>(L)) {
    throw ShapeMismatch("transformer_layer input shape mismatch");
  }

  LayerCache local;
  LayerCache& c = cache ? *cache : local;
  c.x_in = x;

  c.ln1_out = layer_norm(x, layer.ln1_scale, layer.ln1_shift, c.ln1_xhat,
                         c.ln1_inv_std);
  c.q = linear(c.ln1_out, layer.wq, layer.bq);
  c.k = linear(c.ln1_out, layer.wk, layer.bk);
  c.v = linear(c.ln1_out, layer.wv, layer.bv);

  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  c.attn_probs.assign(heads, Eigen::MatrixXd());
  c.attn_concat.resize(L, d);
  for (int h = 0; h < heads; ++h) {
    auto qh = c.q.middleCols(h * dh, dh);
    auto kh = c.k.middleCols(h * dh, dh);
    auto vh = c.v.middleCols(h * dh, dh);
    Eigen::MatrixXd scores = qh * kh.transpose() * inv_sqrt_dh;
    for (Eigen::Index j = 0; j < L; ++j) {
      if (pad_mask[j]) scores.col(j).setConstant(neg_inf);
    }
    Eigen::MatrixXd& probs = c.attn_probs[h];
    probs.resize(L, L);
    for (Eigen::Index i = 0; i < L; ++i) {
      const double row_max = scores.row(i).maxCoeff();
      probs.row(i) = (scores.row(i).array() - row_max).exp().matrix();
      probs.row(i) /= probs.row(i).sum();
    }
    c.attn_concat.middleCols(h * dh, dh) = probs * vh;
  }

  Eigen::MatrixXd attn_out = linear(c.attn_concat, layer.wo, layer.bo);
  if (c.attn_drop_mask.size() > 0) {
    attn_out.array() *= c.attn_drop_mask.array();
  }
  c.res1 = x + attn_out;

  c.ln2_out = layer_norm(c.res1, layer.ln2_scale, layer.ln2_shift, c.ln2_xhat,
                         c.ln2_inv_std);
  c.ffn_pre = linear(c.ln2_out, layer.w1, layer.b1);
  c.ffn_act = c.ffn_pre.unaryExpr([](double v) { return gelu(v); });
  Eigen::MatrixXd ffn_out = linear(c.ffn_act, layer.w2, layer.b2);
  if (c.ffn_drop_mask.size() > 0) {
    ffn_out.array() *= c.ffn_drop_mask.array();
  }
  return c.res1 + ffn_out;
}

ForwardCache forward_pass(const Parameters& params, const ModelConfig& cfg,
                          const InputSequence& seq, Rng* dropout_rng) {
  if (seq.max_len() != cfg.max_len) {
    throw ShapeMismatch("sequence length " + std::to_string(seq.max_len()) +
                        " does not match model max_len " +
                        std::to_string(cfg.max_len));
  }
  const TokenLayout layout = cfg.token_layout();
  const auto L = static_cast<Eigen::Index>(cfg.max_len);
  const bool use_dropout = dropout_rng != nullptr && cfg.dropout > 0.0;

  ForwardCache fc;
  fc.flat_ids.reserve(cfg.max_len);
  fc.pad.resize(cfg.max_len);
  fc.segments = segment_indices(seq);
  fc.embedded.resize(L, cfg.d_model);
  for (std::size_t i = 0; i < cfg.max_len; ++i) {
    const Token& t = seq.tokens[i];
    const std::uint32_t flat = layout.flat_id(t);
    fc.flat_ids.push_back(flat);
    fc.pad[i] = t.kind == TokenKind::Pad;
    fc.embedded.row(i) = params.token_embedding.row(flat) +
                         params.position_embedding.row(i) +
                         params.segment_embedding.row(fc.segments[i]);
  }
  if (use_dropout) {
    fc.embed_drop_mask =
        make_dropout_mask(L, cfg.d_model, cfg.dropout, *dropout_rng);
    fc.embedded.array() *= fc.embed_drop_mask.array();
  }

  fc.layers.resize(cfg.n_layers);
  Eigen::MatrixXd x = fc.embedded;
  for (int l = 0; l < cfg.n_layers; ++l) {
    if (use_dropout) {
      fc.layers[l].attn_drop_mask =
          make_dropout_mask(L, cfg.d_model, cfg.dropout, *dropout_rng);
      fc.layers[l].ffn_drop_mask =
          make_dropout_mask(L, cfg.d_model, cfg.dropout, *dropout_rng);
    }
    x = transformer_layer(params.layers[l], cfg, x, fc.pad, &fc.layers[l]);
  }
  fc.encoded = std::move(x);
  fc.cls = fc.encoded.row(0).transpose();
  fc.logits = params.classifier_w.transpose() * fc.cls +
              params.classifier_b.row(0).transpose();
  fc.probs = softmax(fc.logits);
  return fc;
}

Eigen::VectorXd encode(const Parameters& params, const ModelConfig& cfg,
                       const InputSequence& seq) {
  return forward_pass(params, cfg, seq).cls;
}

Eigen::VectorXd predict_tail_distribution(const Parameters& params,
                                          const ModelConfig& cfg,
                                          const InputSequence& seq) {
  if (params.classifier_w.rows() != cfg.d_model ||
      params.classifier_w.cols() !=
          static_cast<Eigen::Index>(cfg.entity_count)) {
    throw ShapeMismatch("classifier shape inconsistent with model config");
  }
  return forward_pass(params, cfg, seq).probs;
}

namespace {

// Backward through one encoder layer; returns d(loss)/d(layer input).
Eigen::MatrixXd layer_backward(const LayerParams& layer,
                               const ModelConfig& cfg, const LayerCache& c,
                               const Eigen::MatrixXd& dout,
                               LayerParams& grads) {
  const Eigen::Index L = c.x_in.rows();
  const Eigen::Index d = cfg.d_model;
  const int heads = cfg.n_heads;
  const Eigen::Index dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  // FFN sublayer: out = res1 + drop(gelu(LN2(res1) W1 + b1) W2 + b2)
  Eigen::MatrixXd dffn_out = dout;
  if (c.ffn_drop_mask.size() > 0) {
    dffn_out.array() *= c.ffn_drop_mask.array();
  }
  grads.w2 += c.ffn_act.transpose() * dffn_out;
  grads.b2.row(0) += dffn_out.colwise().sum();
  Eigen::MatrixXd dact = dffn_out * layer.w2.transpose();
  Eigen::MatrixXd dpre = dact.cwiseProduct(
      c.ffn_pre.unaryExpr([](double v) { return gelu_derivative(v); }));
  grads.w1 += c.ln2_out.transpose() * dpre;
  grads.b1.row(0) += dpre.colwise().sum();
  Eigen::MatrixXd dln2_out = dpre * layer.w1.transpose();
  Eigen::MatrixXd dres1 =
      layer_norm_backward(dln2_out, c.ln2_xhat, c.ln2_inv_std, layer.ln2_scale,
                          grads.ln2_scale, grads.ln2_shift);
  dres1 += dout;  // residual skip around the FFN sublayer

  // Attention sublayer: res1 = x_in + drop(concat_h(P_h V_h) Wo + bo)
  Eigen::MatrixXd dattn_out = dres1;
  if (c.attn_drop_mask.size() > 0) {
    dattn_out.array() *= c.attn_drop_mask.array();
  }
  grads.wo += c.attn_concat.transpose() * dattn_out;
  grads.bo.row(0) += dattn_out.colwise().sum();
  Eigen::MatrixXd dconcat = dattn_out * layer.wo.transpose();

  Eigen::MatrixXd dq(L, d), dk(L, d), dv(L, d);
  for (int h = 0; h < heads; ++h) {
    auto qh = c.q.middleCols(h * dh, dh);
    auto kh = c.k.middleCols(h * dh, dh);
    auto vh = c.v.middleCols(h * dh, dh);
    const Eigen::MatrixXd& probs = c.attn_probs[h];
    auto dch = dconcat.middleCols(h * dh, dh);

    dv.middleCols(h * dh, dh) = probs.transpose() * dch;
    Eigen::MatrixXd dprobs = dch * vh.transpose();
    // Per query row i: ds_i = P_i .* (dP_i - <dP_i, P_i>). Masked key
    // columns have P = 0, so their score gradient stays zero.
    Eigen::MatrixXd dscores(L, L);
    for (Eigen::Index i = 0; i < L; ++i) {
      const double dot = probs.row(i).dot(dprobs.row(i));
      dscores.row(i) =
          (probs.row(i).array() * (dprobs.row(i).array() - dot)).matrix();
    }
    dscores *= inv_sqrt_dh;
    dq.middleCols(h * dh, dh) = dscores * kh;
    dk.middleCols(h * dh, dh) = dscores.transpose() * qh;
  }

  grads.wq += c.ln1_out.transpose() * dq;
  grads.bq.row(0) += dq.colwise().sum();
  grads.wk += c.ln1_out.transpose() * dk;
  grads.bk.row(0) += dk.colwise().sum();
  grads.wv += c.ln1_out.transpose() * dv;
  grads.bv.row(0) += dv.colwise().sum();

  Eigen::MatrixXd dln1_out = dq * layer.wq.transpose() +
                             dk * layer.wk.transpose() +
                             dv * layer.wv.transpose();
  Eigen::MatrixXd dx =
      layer_norm_backward(dln1_out, c.ln1_xhat, c.ln1_inv_std, layer.ln1_scale,
                          grads.ln1_scale, grads.ln1_shift);
  dx += dres1;  // residual skip around the attention sublayer
  return dx;
}

}  // namespace

void backward_pass(const Parameters& params, const ModelConfig& cfg,
                   const ForwardCache& cache, const Eigen::VectorXd& dlogits,
                   Parameters& grads) {
  grads.classifier_w += cache.cls * dlogits.transpose();
  grads.classifier_b.row(0) += dlogits.transpose();

  Eigen::MatrixXd dx =
      Eigen::MatrixXd::Zero(cache.encoded.rows(), cache.encoded.cols());
  dx.row(0) = (params.classifier_w * dlogits).transpose();

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    dx = layer_backward(params.layers[l], cfg, cache.layers[l], dx,
                        grads.layers[l]);
  }

  if (cache.embed_drop_mask.size() > 0) {
    dx.array() *= cache.embed_drop_mask.array();
  }
  for (std::size_t i = 0; i < cache.flat_ids.size(); ++i) {
    grads.token_embedding.row(cache.flat_ids[i]) += dx.row(i);
    grads.position_embedding.row(i) += dx.row(i);
    grads.segment_embedding.row(cache.segments[i]) += dx.row(i);
  }
}

}  // namespace cabkgc
