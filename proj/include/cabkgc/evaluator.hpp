#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cabkgc/context.hpp"
#include "cabkgc/kg_store.hpp"
#include "cabkgc/model.hpp"
#include "cabkgc/types.hpp"

namespace cabkgc {

// Pessimistic resolves score ties against the true tail (its rank counts
// every tied competitor); optimistic resolves them in its favor.
enum class TiePolicy { Pessimistic, Optimistic };

// Filtered removes other known-correct tails of (h, r) from the candidate
// set before ranking; raw ranks against every entity.
enum class Protocol { Raw, Filtered };

std::string to_string(Protocol protocol);
std::string to_string(TiePolicy policy);

struct RankResult {
  Triple triple;
  std::size_t rank = 0;  // 1-based
  bool filtered = false;
};

struct MetricsReport {
  Protocol protocol = Protocol::Filtered;
  std::size_t n_evaluated = 0;
  double mrr = 0.0;
  std::vector<std::pair<int, double>> hits_at;  // ascending k

  // Canonical fixed-order, fixed-precision key-value block; equal reports
  // render byte-identically.
  std::string to_text() const;
  std::string to_json_string() const;
};

// Rank of `true_tail` in descending score order after removing `filter_out`.
// Throws FilteredTrueTail if the true tail itself is filtered.
std::size_t compute_rank(const Eigen::VectorXd& scores, EntityId true_tail,
                         const std::unordered_set<EntityId>& filter_out,
                         TiePolicy policy);

// Throw EmptyInput on an empty rank list; hits_at_k also rejects k < 1.
double mrr(const std::vector<std::size_t>& ranks);
double hits_at_k(const std::vector<std::size_t>& ranks, int k);

// Known tails per (h, r) across any number of splits, for the filtered
// protocol.
class TailFilter {
 public:
  void add(const std::vector<Triple>& triples);

  // Every known tail of (h, r) except t itself.
  std::unordered_set<EntityId> alternatives(EntityId h, RelationId r,
                                            EntityId t) const;

 private:
  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
};

// Scores over all entities for the query (triple.head, triple.relation, ?).
using Scorer = std::function<Eigen::VectorXd(const Triple&)>;

struct EvalOptions {
  Protocol protocol = Protocol::Filtered;
  TiePolicy tie_policy = TiePolicy::Pessimistic;
  std::vector<int> ks = {1, 3, 10};
  unsigned n_threads = 1;  // query-level parallelism
};

// Rank every query. Queries are independent: with n_threads > 1 they are
// scored in parallel into per-query slots, so results match the serial run
// exactly. `filter` may be null (raw protocol).
std::vector<RankResult> rank_queries(const Scorer& scorer,
                                     const std::vector<Triple>& queries,
                                     const TailFilter* filter,
                                     TiePolicy policy, unsigned n_threads);

MetricsReport aggregate_metrics(const std::vector<RankResult>& results,
                                const std::vector<int>& ks, Protocol protocol);

// rank_queries + aggregate_metrics; throws EmptyInput on an empty query list.
MetricsReport evaluate_queries(const Scorer& scorer,
                               const std::vector<Triple>& queries,
                               const TailFilter* filter,
                               const EvalOptions& options);

// Model-backed evaluation. Contexts come from `cache` (built over the train
// graph); the filter set covers train, valid and test.
MetricsReport evaluate_split(const Parameters& params, const ModelConfig& cfg,
                             const ContextCache& cache,
                             const DatasetSplits& all_splits,
                             const std::vector<Triple>& eval_split,
                             const EvalOptions& options);

}  // namespace cabkgc
