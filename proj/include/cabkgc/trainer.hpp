#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cabkgc/adam.hpp"
#include "cabkgc/context.hpp"
#include "cabkgc/kg_store.hpp"
#include "cabkgc/model.hpp"
#include "cabkgc/rng.hpp"
#include "cabkgc/sequence.hpp"

namespace cabkgc {

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 5e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_epochs = 200;
  int stabilization_patience = 3;
  int stabilization_decimals = 3;
  std::uint64_t seed = 0;
  // Evaluate at most this many validation queries per epoch (evenly spaced);
  // 0 means the full split.
  std::size_t validation_subsample = 0;

  AdamConfig adam() const {
    return {learning_rate, adam_beta1, adam_beta2, adam_eps};
  }
  // Throws InvalidConfig naming the offending field.
  void validate() const;
};

struct EpochStats {
  int epoch = 0;  // 1-based, contiguous
  double mean_loss = 0.0;
  double val_mrr = 0.0;
  std::vector<std::pair<int, double>> val_hits_at;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::string stop_reason;  // "stabilized" or "max_epochs"
  int best_epoch = 0;
  double best_val_mrr = 0.0;
};

struct TrainResult {
  Parameters params;  // best-validation parameters
  TrainReport report;
};

// -log(dist[true_tail]) with probability floor 1e-12, so the loss stays in
// [0, -ln(1e-12)]. Throws IndexOutOfRange for an invalid tail id.
double cross_entropy_loss(const Eigen::VectorXd& dist, EntityId true_tail);

struct Batch {
  std::vector<InputSequence> seqs;
  std::vector<EntityId> tails;
};

// Mean cross-entropy over the batch, forward passes only.
double batch_loss(const Parameters& params, const ModelConfig& cfg,
                  const Batch& batch);

// Overwrites `grads` (which must mirror params) with the exact analytic
// gradient of the mean batch loss and returns that loss. Dropout is applied
// only when `dropout_rng` is given and cfg.dropout > 0.
double loss_and_gradients(const Parameters& params, const ModelConfig& cfg,
                          const Batch& batch, Parameters& grads,
                          Rng* dropout_rng = nullptr);

// Stops once the watched value, rounded to `decimals`, has been unchanged
// from its predecessor for `patience` consecutive epochs.
class StabilizationTracker {
 public:
  StabilizationTracker(int patience, int decimals);

  // Feed one per-epoch value; true means stop now.
  bool update(double value);
  int streak() const { return streak_; }

 private:
  int patience_;
  double scale_;
  int streak_ = 0;
  bool has_prev_ = false;
  long long prev_ = 0;
};

// Full training loop: seeded per-epoch shuffle, mini-batches through
// loss_and_gradients + adam_step, filtered validation MRR after every epoch,
// metric-stabilization stopping, best-validation parameters returned.
// Contexts are read from `cache`, which must be built over the train graph.
// Throws EmptySplit when train or valid is empty. `log`, when given, gets one
// line per epoch.
TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const ContextCache& cache, const DatasetSplits& splits,
                  std::ostream* log = nullptr);

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::string worst_tensor;
  Eigen::Index worst_row = 0;
  Eigen::Index worst_col = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string note;  // non-empty when nothing was verified
};

// |a - b| relative to max(|a|, |b|, 1e-4); the floor keeps near-zero
// gradient pairs, where central differences are all rounding noise, from
// reporting spurious error.
double relative_error(double a, double b);

// Central finite difference of the mean batch loss with respect to one
// coordinate of the tensor at `tensor_index` in named_tensors order.
double finite_difference_gradient(Parameters params, const ModelConfig& cfg,
                                  const Batch& batch, std::size_t tensor_index,
                                  Eigen::Index row, Eigen::Index col,
                                  double step = 1e-5);

// Deterministic synthetic batch of structurally valid sequences (random head,
// relation and contexts drawn from cfg's vocabulary) for gradient probing.
Batch make_probe_batch(const ModelConfig& cfg, std::size_t n_examples,
                       Rng& rng);

// Analytic vs central finite-difference gradients at n_probes coordinates
// cycled across every tensor (round-robin, random coordinate within each).
// Dropout is forced off. n_probes = 0 yields error 0 with a warning note.
GradientCheckReport check_gradients(const ModelConfig& cfg,
                                    std::size_t n_probes);

}  // namespace cabkgc
