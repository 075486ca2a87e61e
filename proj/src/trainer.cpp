#include "cabkgc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "cabkgc/encoder.hpp"
#include "cabkgc/errors.hpp"
#include "cabkgc/evaluator.hpp"

namespace cabkgc {

namespace {

constexpr double kProbFloor = 1e-12;

void require(bool ok, const char* field, const std::string& why) {
  if (!ok) {
    throw InvalidConfig(std::string("train config field '") + field + "' " +
                        why);
  }
}

}  // namespace

void TrainConfig::validate() const {
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(learning_rate > 0.0, "learning_rate", "must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1",
          "must lie in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2",
          "must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps", "must be positive");
  require(max_epochs >= 1, "max_epochs", "must be >= 1");
  require(stabilization_patience >= 1, "stabilization_patience",
          "must be >= 1");
  require(stabilization_decimals >= 0 && stabilization_decimals <= 12,
          "stabilization_decimals", "must lie in [0, 12]");
}

double cross_entropy_loss(const Eigen::VectorXd& dist, EntityId true_tail) {
  if (true_tail.value >= static_cast<std::size_t>(dist.size())) {
    throw IndexOutOfRange("true tail id " + std::to_string(true_tail.value) +
                          " outside distribution of size " +
                          std::to_string(dist.size()));
  }
  const double p = dist[static_cast<Eigen::Index>(true_tail.value)];
  return -std::log(std::max(p, kProbFloor));
}

double batch_loss(const Parameters& params, const ModelConfig& cfg,
                  const Batch& batch) {
  if (batch.seqs.empty()) {
    throw EmptyInput("batch_loss on an empty batch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch.seqs.size(); ++i) {
    ForwardCache fc = forward_pass(params, cfg, batch.seqs[i]);
    total += cross_entropy_loss(fc.probs, batch.tails[i]);
  }
  return total / static_cast<double>(batch.seqs.size());
}

double loss_and_gradients(const Parameters& params, const ModelConfig& cfg,
                          const Batch& batch, Parameters& grads,
                          Rng* dropout_rng) {
  if (batch.seqs.empty()) {
    throw EmptyInput("loss_and_gradients on an empty batch");
  }
  if (batch.seqs.size() != batch.tails.size()) {
    throw ShapeMismatch("batch sequence/tail count mismatch");
  }
  check_same_shape(params, grads, "loss_and_gradients output");
  for (auto& nt : named_tensors(grads)) {
    nt.tensor->setZero();
  }

  const auto n = static_cast<double>(batch.seqs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.seqs.size(); ++i) {
    const EntityId tail = batch.tails[i];
    ForwardCache fc = forward_pass(params, cfg, batch.seqs[i], dropout_rng);
    total += cross_entropy_loss(fc.probs, tail);
    // d(mean CE)/d(logits) = (probs - onehot) / n, unclamped.
    Eigen::VectorXd dlogits = fc.probs / n;
    dlogits[static_cast<Eigen::Index>(tail.value)] -= 1.0 / n;
    backward_pass(params, cfg, fc, dlogits, grads);
  }
  return total / n;
}

StabilizationTracker::StabilizationTracker(int patience, int decimals)
    : patience_(patience), scale_(std::pow(10.0, decimals)) {}

bool StabilizationTracker::update(double value) {
  const long long rounded = std::llround(value * scale_);
  if (has_prev_ && rounded == prev_) {
    ++streak_;
  } else {
    streak_ = 0;
  }
  has_prev_ = true;
  prev_ = rounded;
  return streak_ >= patience_;
}

namespace {

std::vector<Triple> subsample_validation(const std::vector<Triple>& valid,
                                         std::size_t limit) {
  if (limit == 0 || limit >= valid.size()) return valid;
  std::vector<Triple> out;
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) {
    out.push_back(valid[i * valid.size() / limit]);
  }
  return out;
}

}  // namespace

TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const ContextCache& cache, const DatasetSplits& splits,
                  std::ostream* log) {
  mcfg.validate();
  tcfg.validate();
  if (splits.train.empty()) {
    throw EmptySplit("train split is empty");
  }
  if (splits.valid.empty()) {
    throw EmptySplit("valid split is empty (needed for stabilization)");
  }

  // Sequences depend only on the immutable train-graph contexts, so build
  // them once up front.
  std::vector<InputSequence> train_seqs;
  train_seqs.reserve(splits.train.size());
  for (const Triple& t : splits.train) {
    train_seqs.push_back(build_input_sequence(t.head, cache.head(t.head),
                                              t.relation,
                                              cache.relation(t.relation),
                                              mcfg.max_len));
  }

  const std::vector<Triple> val_queries =
      subsample_validation(splits.valid, tcfg.validation_subsample);
  TailFilter val_filter;
  val_filter.add(splits.train);
  val_filter.add(splits.valid);
  val_filter.add(splits.test);
  EvalOptions val_options;
  val_options.protocol = Protocol::Filtered;

  Parameters params = init_parameters(mcfg);
  OptimizerState opt = OptimizerState::zeros(mcfg);
  Parameters grads = Parameters::zeros(mcfg);
  Rng shuffle_rng(tcfg.seed);
  Rng dropout_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng* dropout = mcfg.dropout > 0.0 ? &dropout_rng : nullptr;

  StabilizationTracker tracker(tcfg.stabilization_patience,
                               tcfg.stabilization_decimals);
  TrainResult result;
  result.params = params;
  result.report.best_epoch = 0;
  result.report.best_val_mrr = -1.0;

  std::vector<std::size_t> order(splits.train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(tcfg.batch_size);

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    Batch batch;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(start + batch_size, order.size());
      batch.seqs.clear();
      batch.tails.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.seqs.push_back(train_seqs[order[i]]);
        batch.tails.push_back(splits.train[order[i]].tail);
      }
      const double mean = loss_and_gradients(params, mcfg, batch, grads,
                                             dropout);
      loss_sum += mean * static_cast<double>(end - start);
      adam_step(params, grads, opt, tcfg.adam());
    }

    Scorer scorer = [&](const Triple& q) {
      InputSequence seq =
          build_input_sequence(q.head, cache.head(q.head), q.relation,
                               cache.relation(q.relation), mcfg.max_len);
      return forward_pass(params, mcfg, seq).probs;
    };
    MetricsReport val =
        evaluate_queries(scorer, val_queries, &val_filter, val_options);

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(order.size());
    stats.val_mrr = val.mrr;
    stats.val_hits_at = val.hits_at;
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.report.epochs.push_back(stats);

    if (log) {
      (*log) << "epoch " << epoch << ": loss " << stats.mean_loss
             << ", val MRR " << stats.val_mrr << "\n";
    }

    if (val.mrr > result.report.best_val_mrr) {
      result.report.best_val_mrr = val.mrr;
      result.report.best_epoch = epoch;
      result.params = params;
    }

    if (tracker.update(val.mrr)) {
      result.report.stop_reason = "stabilized";
      break;
    }
  }
  if (result.report.stop_reason.empty()) {
    result.report.stop_reason = "max_epochs";
  }
  return result;
}

double relative_error(double a, double b) {
  // The 1e-4 floor makes absolute disagreements below 1e-8 — the noise level
  // of a central difference at step 1e-5 in doubles — count as agreement;
  // real backprop defects show up at the scale of the gradients themselves.
  const double denom = std::max({std::abs(a), std::abs(b), 1e-4});
  return std::abs(a - b) / denom;
}

double finite_difference_gradient(Parameters params, const ModelConfig& cfg,
                                  const Batch& batch,
                                  std::size_t tensor_index, Eigen::Index row,
                                  Eigen::Index col, double step) {
  auto tensors = named_tensors(params);
  if (tensor_index >= tensors.size()) {
    throw IndexOutOfRange("tensor index " + std::to_string(tensor_index) +
                          " out of range");
  }
  Eigen::MatrixXd& t = *tensors[tensor_index].tensor;
  const double original = t(row, col);
  t(row, col) = original + step;
  const double plus = batch_loss(params, cfg, batch);
  t(row, col) = original - step;
  const double minus = batch_loss(params, cfg, batch);
  t(row, col) = original;
  return (plus - minus) / (2.0 * step);
}

Batch make_probe_batch(const ModelConfig& cfg, std::size_t n_examples,
                       Rng& rng) {
  const std::size_t n_entities = cfg.entity_count;
  const std::size_t n_relations = cfg.relation_count();
  Batch batch;
  for (std::size_t i = 0; i < n_examples; ++i) {
    const EntityId h{static_cast<std::uint32_t>(rng.bounded(n_entities))};
    const RelationId r{static_cast<std::uint32_t>(rng.bounded(n_relations))};
    // Random context sizes so some examples carry PAD tail and others hit
    // the re-truncation path.
    ContextSet hc, rc;
    const std::size_t hc_n = rng.bounded(cfg.max_len);
    const std::size_t rc_n = rng.bounded(cfg.max_len);
    for (std::size_t j = 0; j < hc_n; ++j) {
      if (rng.bounded(2) == 0) {
        hc.symbols.push_back(ContextSymbol::relation(
            RelationId{static_cast<std::uint32_t>(rng.bounded(n_relations))}));
      } else {
        hc.symbols.push_back(ContextSymbol::entity(
            EntityId{static_cast<std::uint32_t>(rng.bounded(n_entities))}));
      }
    }
    for (std::size_t j = 0; j < rc_n; ++j) {
      rc.symbols.push_back(ContextSymbol::entity(
          EntityId{static_cast<std::uint32_t>(rng.bounded(n_entities))}));
    }
    batch.seqs.push_back(
        build_input_sequence(h, hc, r, rc, cfg.max_len));
    batch.tails.push_back(
        EntityId{static_cast<std::uint32_t>(rng.bounded(n_entities))});
  }
  return batch;
}

GradientCheckReport check_gradients(const ModelConfig& cfg,
                                    std::size_t n_probes) {
  GradientCheckReport report;
  report.probes = n_probes;
  if (n_probes == 0) {
    report.note = "no probes requested; nothing was verified";
    return report;
  }

  ModelConfig probe_cfg = cfg;
  probe_cfg.dropout = 0.0;  // finite differences need a deterministic loss
  probe_cfg.validate();

  Rng rng(probe_cfg.seed + 1);
  Parameters params = init_parameters(probe_cfg);
  const Batch batch = make_probe_batch(probe_cfg, 3, rng);

  Parameters grads = Parameters::zeros(probe_cfg);
  loss_and_gradients(params, probe_cfg, batch, grads);
  auto grad_tensors = named_tensors(grads);

  for (std::size_t probe = 0; probe < n_probes; ++probe) {
    const std::size_t ti = probe % grad_tensors.size();
    const Eigen::MatrixXd& g = *grad_tensors[ti].tensor;
    const auto row = static_cast<Eigen::Index>(
        rng.bounded(static_cast<std::size_t>(g.rows())));
    const auto col = static_cast<Eigen::Index>(
        rng.bounded(static_cast<std::size_t>(g.cols())));
    const double analytic = g(row, col);
    const double numeric =
        finite_difference_gradient(params, probe_cfg, batch, ti, row, col);
    const double err = relative_error(analytic, numeric);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_tensor = grad_tensors[ti].name;
      report.worst_row = row;
      report.worst_col = col;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace cabkgc
