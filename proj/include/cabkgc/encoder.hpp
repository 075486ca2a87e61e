#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cabkgc/model.hpp"
#include "cabkgc/rng.hpp"
#include "cabkgc/sequence.hpp"

namespace cabkgc {

// Everything the backward pass needs from one layer's forward evaluation.
struct LayerCache {
  Eigen::MatrixXd x_in;        // [L x d] layer input
  Eigen::MatrixXd ln1_xhat;    // normalized input, pre scale/shift
  Eigen::VectorXd ln1_inv_std; // per-position 1/sqrt(var + eps)
  Eigen::MatrixXd ln1_out;
  Eigen::MatrixXd q, k, v;                 // [L x d]
  std::vector<Eigen::MatrixXd> attn_probs; // per head, [L x L], rows = queries
  Eigen::MatrixXd attn_concat;             // heads concatenated, [L x d]
  Eigen::MatrixXd attn_drop_mask;          // empty unless dropout active
  Eigen::MatrixXd res1;                    // x_in + attention sublayer
  Eigen::MatrixXd ln2_xhat;
  Eigen::VectorXd ln2_inv_std;
  Eigen::MatrixXd ln2_out;
  Eigen::MatrixXd ffn_pre;  // [L x ff_dim]
  Eigen::MatrixXd ffn_act;  // gelu(ffn_pre)
  Eigen::MatrixXd ffn_drop_mask;
};

struct ForwardCache {
  std::vector<std::uint32_t> flat_ids;
  std::vector<std::uint8_t> segments;
  std::vector<bool> pad;           // true at PAD positions
  Eigen::MatrixXd embedded;        // token + position + segment sums
  Eigen::MatrixXd embed_drop_mask;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd encoded;      // final layer output, [L x d]
  Eigen::VectorXd cls;          // encoded.row(0)
  Eigen::VectorXd logits;       // [entity_count]
  Eigen::VectorXd probs;
};

// Full forward evaluation through the classifier head. Inference mode unless
// a dropout rng is supplied and cfg.dropout > 0.
ForwardCache forward_pass(const Parameters& params, const ModelConfig& cfg,
                          const InputSequence& seq, Rng* dropout_rng = nullptr);

// One pre-norm encoder layer: LN -> masked multi-head self-attention ->
// residual, LN -> GELU feed-forward -> residual. PAD positions receive zero
// attention weight from every query. `cache`, when given, is filled for the
// backward pass.
Eigen::MatrixXd transformer_layer(const LayerParams& layer,
                                  const ModelConfig& cfg,
                                  const Eigen::MatrixXd& x,
                                  const std::vector<bool>& pad_mask,
                                  LayerCache* cache = nullptr);

// Contextualized representation at the CLS position (inference mode).
Eigen::VectorXd encode(const Parameters& params, const ModelConfig& cfg,
                       const InputSequence& seq);

// softmax(classifier_w^T . encode(seq) + classifier_b).
Eigen::VectorXd predict_tail_distribution(const Parameters& params,
                                          const ModelConfig& cfg,
                                          const InputSequence& seq);

// Accumulate d(loss)/d(params) into `grads` given d(loss)/d(logits).
// `grads` must be Parameters-shaped (see Parameters::zeros).
void backward_pass(const Parameters& params, const ModelConfig& cfg,
                   const ForwardCache& cache, const Eigen::VectorXd& dlogits,
                   Parameters& grads);

double gelu(double x);
double gelu_derivative(double x);

}  // namespace cabkgc
