#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cabkgc/sequence.hpp"

namespace cabkgc {

// Desk-scale stand-in for the usual pretrained backbone: a small from-scratch
// pre-norm transformer encoder over atomic symbol tokens, 64-bit floats
// throughout so gradient checks are meaningful.
struct ModelConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int ff_dim = 256;
  std::size_t max_len = 72;
  std::size_t token_vocab_size = 0;  // |E| + |R| + 3
  std::size_t entity_count = 0;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  std::size_t relation_count() const {
    return token_vocab_size - entity_count - 3;
  }
  TokenLayout token_layout() const {
    return TokenLayout{entity_count, relation_count()};
  }
  // Throws InvalidConfig when any invariant is violated.
  void validate() const;

  static ModelConfig for_vocabulary(std::size_t entity_count,
                                    std::size_t relation_count);
};

// All matrices are doubles. Vector-shaped tensors (biases, layer-norm scale
// and shift) are stored as 1 x n matrices so that every parameter can be
// visited uniformly.
struct LayerParams {
  Eigen::MatrixXd ln1_scale, ln1_shift;
  Eigen::MatrixXd wq, bq, wk, bk, wv, bv, wo, bo;
  Eigen::MatrixXd ln2_scale, ln2_shift;
  Eigen::MatrixXd w1, b1, w2, b2;
};

struct Parameters {
  Eigen::MatrixXd token_embedding;     // [token_vocab_size x d_model]
  Eigen::MatrixXd position_embedding;  // [max_len x d_model]
  Eigen::MatrixXd segment_embedding;   // [2 x d_model]
  std::vector<LayerParams> layers;
  Eigen::MatrixXd classifier_w;  // [d_model x entity_count]
  Eigen::MatrixXd classifier_b;  // [1 x entity_count]

  static Parameters zeros(const ModelConfig& cfg);
};

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd* tensor;
};
struct NamedTensorView {
  std::string name;
  const Eigen::MatrixXd* tensor;
};

// Flat views over all tensors in a fixed canonical order. The order defines
// the checkpoint tensor order and the coordinate space of gradient probing.
std::vector<NamedTensor> named_tensors(Parameters& p);
std::vector<NamedTensorView> named_tensors(const Parameters& p);

// Deterministic for a fixed cfg.seed: weights and embeddings uniform in
// [-1/sqrt(d_model), 1/sqrt(d_model)), layer-norm scales 1, shifts and biases
// 0.
Parameters init_parameters(const ModelConfig& cfg);

bool all_finite(const Parameters& p);

// Throws ShapeMismatch unless b's tensors all match a's shapes.
void check_same_shape(const Parameters& a, const Parameters& b,
                      const char* what);

// Max-subtracted softmax; stable for logits up to +-1e4.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace cabkgc
