#include "cabkgc/model.hpp"

#include <cmath>

#include "cabkgc/errors.hpp"
#include "cabkgc/rng.hpp"

namespace cabkgc {

void ModelConfig::validate() const {
  if (d_model < 1 || n_layers < 0 || n_heads < 1 || ff_dim < 1) {
    throw InvalidConfig("model dimensions must be >= 1 (n_layers >= 0)");
  }
  if (d_model % n_heads != 0) {
    throw InvalidConfig("d_model (" + std::to_string(d_model) +
                        ") must be divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
  }
  if (max_len < 4) {
    throw InvalidConfig("max_len must be >= 4");
  }
  if (entity_count < 1) {
    throw InvalidConfig("entity_count must be >= 1");
  }
  if (token_vocab_size < entity_count + 3 + 1) {
    throw InvalidConfig(
        "token_vocab_size must cover entities, at least one relation and the "
        "3 special tokens");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw InvalidConfig("dropout must lie in [0, 1)");
  }
}

ModelConfig ModelConfig::for_vocabulary(std::size_t entity_count,
                                        std::size_t relation_count) {
  ModelConfig cfg;
  cfg.entity_count = entity_count;
  cfg.token_vocab_size = entity_count + relation_count + 3;
  return cfg;
}

Parameters Parameters::zeros(const ModelConfig& cfg) {
  cfg.validate();
  Parameters p;
  p.token_embedding =
      Eigen::MatrixXd::Zero(cfg.token_vocab_size, cfg.d_model);
  p.position_embedding = Eigen::MatrixXd::Zero(cfg.max_len, cfg.d_model);
  p.segment_embedding = Eigen::MatrixXd::Zero(2, cfg.d_model);
  p.layers.resize(cfg.n_layers);
  for (auto& l : p.layers) {
    l.ln1_scale = Eigen::MatrixXd::Zero(1, cfg.d_model);
    l.ln1_shift = Eigen::MatrixXd::Zero(1, cfg.d_model);
    l.wq = Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_model);
    l.bq = Eigen::MatrixXd::Zero(1, cfg.d_model);
    l.wk = Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_model);
    l.bk = Eigen::MatrixXd::Zero(1, cfg.d_model);
    l.wv = Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_model);
    l.bv = Eigen::MatrixXd::Zero(1, cfg.d_model);
    l.wo = Eigen::MatrixXd::Zero(cfg.d_model, cfg.d_model);
    l.bo = Eigen::MatrixXd::Zero(1, cfg.d_model);
    l.ln2_scale = Eigen::MatrixXd::Zero(1, cfg.d_model);
    l.ln2_shift = Eigen::MatrixXd::Zero(1, cfg.d_model);
    l.w1 = Eigen::MatrixXd::Zero(cfg.d_model, cfg.ff_dim);
    l.b1 = Eigen::MatrixXd::Zero(1, cfg.ff_dim);
    l.w2 = Eigen::MatrixXd::Zero(cfg.ff_dim, cfg.d_model);
    l.b2 = Eigen::MatrixXd::Zero(1, cfg.d_model);
  }
  p.classifier_w = Eigen::MatrixXd::Zero(cfg.d_model, cfg.entity_count);
  p.classifier_b = Eigen::MatrixXd::Zero(1, cfg.entity_count);
  return p;
}

namespace {

template <class Tensor, class Named>
void collect_tensors(Tensor& p, std::vector<Named>& out) {
  out.push_back({"token_embedding", &p.token_embedding});
  out.push_back({"position_embedding", &p.position_embedding});
  out.push_back({"segment_embedding", &p.segment_embedding});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    std::string prefix = "layers." + std::to_string(i) + ".";
    out.push_back({prefix + "ln1.scale", &l.ln1_scale});
    out.push_back({prefix + "ln1.shift", &l.ln1_shift});
    out.push_back({prefix + "attn.wq", &l.wq});
    out.push_back({prefix + "attn.bq", &l.bq});
    out.push_back({prefix + "attn.wk", &l.wk});
    out.push_back({prefix + "attn.bk", &l.bk});
    out.push_back({prefix + "attn.wv", &l.wv});
    out.push_back({prefix + "attn.bv", &l.bv});
    out.push_back({prefix + "attn.wo", &l.wo});
    out.push_back({prefix + "attn.bo", &l.bo});
    out.push_back({prefix + "ln2.scale", &l.ln2_scale});
    out.push_back({prefix + "ln2.shift", &l.ln2_shift});
    out.push_back({prefix + "ffn.w1", &l.w1});
    out.push_back({prefix + "ffn.b1", &l.b1});
    out.push_back({prefix + "ffn.w2", &l.w2});
    out.push_back({prefix + "ffn.b2", &l.b2});
  }
  out.push_back({"classifier.w", &p.classifier_w});
  out.push_back({"classifier.b", &p.classifier_b});
}

}  // namespace

std::vector<NamedTensor> named_tensors(Parameters& p) {
  std::vector<NamedTensor> out;
  collect_tensors(p, out);
  return out;
}

std::vector<NamedTensorView> named_tensors(const Parameters& p) {
  std::vector<NamedTensorView> out;
  collect_tensors(p, out);
  return out;
}

namespace {

void fill_uniform(Eigen::MatrixXd& m, Rng& rng, double scale) {
  // Row-major draw order so the layout, not Eigen's storage, defines the
  // random stream.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform_symmetric(scale);
    }
  }
}

}  // namespace

Parameters init_parameters(const ModelConfig& cfg) {
  cfg.validate();
  Parameters p = Parameters::zeros(cfg);
  Rng rng(cfg.seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  fill_uniform(p.token_embedding, rng, scale);
  fill_uniform(p.position_embedding, rng, scale);
  fill_uniform(p.segment_embedding, rng, scale);
  for (auto& l : p.layers) {
    l.ln1_scale.setOnes();
    l.ln2_scale.setOnes();
    fill_uniform(l.wq, rng, scale);
    fill_uniform(l.wk, rng, scale);
    fill_uniform(l.wv, rng, scale);
    fill_uniform(l.wo, rng, scale);
    fill_uniform(l.w1, rng, scale);
    fill_uniform(l.w2, rng, scale);
  }
  fill_uniform(p.classifier_w, rng, scale);
  return p;
}

bool all_finite(const Parameters& p) {
  for (const auto& [name, tensor] : named_tensors(p)) {
    if (!tensor->allFinite()) return false;
  }
  return true;
}

void check_same_shape(const Parameters& a, const Parameters& b,
                      const char* what) {
  auto ta = named_tensors(a);
  auto tb = named_tensors(b);
  if (ta.size() != tb.size()) {
    throw ShapeMismatch(std::string(what) + ": tensor count differs");
  }
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].tensor->rows() != tb[i].tensor->rows() ||
        ta[i].tensor->cols() != tb[i].tensor->cols()) {
      throw ShapeMismatch(std::string(what) + ": shape of " + ta[i].name +
                          " differs");
    }
  }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd out = logits;
  double max = out.maxCoeff();
  out = (out.array() - max).exp();
  out /= out.sum();
  return out;
}

}  // namespace cabkgc
