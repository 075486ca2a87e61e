#include "cabkgc/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <thread>

#include <nlohmann/json.hpp>

#include "cabkgc/encoder.hpp"
#include "cabkgc/errors.hpp"
#include "cabkgc/sequence.hpp"

namespace cabkgc {

namespace {

std::uint64_t pack_query(EntityId h, RelationId r) {
  return (static_cast<std::uint64_t>(h.value) << 32) | r.value;
}

std::string format_fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string to_string(Protocol protocol) {
  return protocol == Protocol::Raw ? "raw" : "filtered";
}

std::string to_string(TiePolicy policy) {
  return policy == TiePolicy::Pessimistic ? "pessimistic" : "optimistic";
}

std::string MetricsReport::to_text() const {
  std::string out;
  out += "protocol: " + cabkgc::to_string(protocol) + "\n";
  out += "n_evaluated: " + std::to_string(n_evaluated) + "\n";
  out += "mrr: " + format_fraction(mrr) + "\n";
  for (const auto& [k, v] : hits_at) {
    out += "hits@" + std::to_string(k) + ": " + format_fraction(v) + "\n";
  }
  return out;
}

std::string MetricsReport::to_json_string() const {
  nlohmann::ordered_json j;
  j["protocol"] = cabkgc::to_string(protocol);
  j["n_evaluated"] = n_evaluated;
  j["mrr"] = mrr;
  nlohmann::ordered_json hits = nlohmann::ordered_json::object();
  for (const auto& [k, v] : hits_at) {
    hits[std::to_string(k)] = v;
  }
  j["hits_at"] = hits;
  return j.dump(2);
}

std::size_t compute_rank(const Eigen::VectorXd& scores, EntityId true_tail,
                         const std::unordered_set<EntityId>& filter_out,
                         TiePolicy policy) {
  const auto n = static_cast<std::size_t>(scores.size());
  if (true_tail.value >= n) {
    throw IndexOutOfRange("true tail id " + std::to_string(true_tail.value) +
                          " outside score vector of size " +
                          std::to_string(n));
  }
  if (filter_out.contains(true_tail)) {
    throw FilteredTrueTail("true tail " + std::to_string(true_tail.value) +
                           " present in its own filter set");
  }
  const double true_score = scores[static_cast<Eigen::Index>(true_tail.value)];
  std::size_t greater = 0;
  std::size_t tied = 0;
  for (std::size_t e = 0; e < n; ++e) {
    if (e == true_tail.value) continue;
    if (!filter_out.empty() && filter_out.contains(EntityId{
                                   static_cast<std::uint32_t>(e)})) {
      continue;
    }
    const double s = scores[static_cast<Eigen::Index>(e)];
    if (s > true_score) {
      ++greater;
    } else if (s == true_score) {
      ++tied;
    }
  }
  return 1 + greater + (policy == TiePolicy::Pessimistic ? tied : 0);
}

double mrr(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) {
    throw EmptyInput("mrr of an empty rank list");
  }
  double sum = 0.0;
  for (std::size_t r : ranks) {
    sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(ranks.size());
}

double hits_at_k(const std::vector<std::size_t>& ranks, int k) {
  if (ranks.empty()) {
    throw EmptyInput("hits_at_k of an empty rank list");
  }
  if (k < 1) {
    throw InvalidConfig("hits_at_k requires k >= 1, got " + std::to_string(k));
  }
  std::size_t hits = 0;
  for (std::size_t r : ranks) {
    if (r <= static_cast<std::size_t>(k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

void TailFilter::add(const std::vector<Triple>& triples) {
  for (const Triple& t : triples) {
    tails_[pack_query(t.head, t.relation)].push_back(t.tail);
  }
}

std::unordered_set<EntityId> TailFilter::alternatives(EntityId h, RelationId r,
                                                      EntityId t) const {
  std::unordered_set<EntityId> out;
  auto it = tails_.find(pack_query(h, r));
  if (it == tails_.end()) return out;
  for (EntityId tail : it->second) {
    if (tail != t) out.insert(tail);
  }
  return out;
}

std::vector<RankResult> rank_queries(const Scorer& scorer,
                                     const std::vector<Triple>& queries,
                                     const TailFilter* filter,
                                     TiePolicy policy, unsigned n_threads) {
  std::vector<RankResult> results(queries.size());
  const std::unordered_set<EntityId> no_filter;

  auto rank_one = [&](std::size_t i) {
    const Triple& q = queries[i];
    Eigen::VectorXd scores = scorer(q);
    std::unordered_set<EntityId> filtered_out =
        filter ? filter->alternatives(q.head, q.relation, q.tail) : no_filter;
    results[i].triple = q;
    results[i].rank = compute_rank(scores, q.tail, filtered_out, policy);
    results[i].filtered = filter != nullptr;
  };

  if (n_threads <= 1 || queries.size() < 2) {
    for (std::size_t i = 0; i < queries.size(); ++i) rank_one(i);
    return results;
  }

  // Each worker owns a static stripe of query slots; no shared mutable state,
  // so the outcome is independent of scheduling.
  const unsigned workers =
      std::min<unsigned>(n_threads, static_cast<unsigned>(queries.size()));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < queries.size(); i += workers) {
        rank_one(i);
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

MetricsReport aggregate_metrics(const std::vector<RankResult>& results,
                                const std::vector<int>& ks,
                                Protocol protocol) {
  std::vector<std::size_t> ranks;
  ranks.reserve(results.size());
  for (const RankResult& r : results) ranks.push_back(r.rank);

  MetricsReport report;
  report.protocol = protocol;
  report.n_evaluated = ranks.size();
  report.mrr = mrr(ranks);
  std::vector<int> sorted_ks = ks;
  std::sort(sorted_ks.begin(), sorted_ks.end());
  sorted_ks.erase(std::unique(sorted_ks.begin(), sorted_ks.end()),
                  sorted_ks.end());
  for (int k : sorted_ks) {
    report.hits_at.emplace_back(k, hits_at_k(ranks, k));
  }
  return report;
}

MetricsReport evaluate_queries(const Scorer& scorer,
                               const std::vector<Triple>& queries,
                               const TailFilter* filter,
                               const EvalOptions& options) {
  if (queries.empty()) {
    throw EmptyInput("evaluate: no queries");
  }
  const TailFilter* effective =
      options.protocol == Protocol::Filtered ? filter : nullptr;
  auto results = rank_queries(scorer, queries, effective, options.tie_policy,
                              options.n_threads);
  return aggregate_metrics(results, options.ks, options.protocol);
}

MetricsReport evaluate_split(const Parameters& params, const ModelConfig& cfg,
                             const ContextCache& cache,
                             const DatasetSplits& all_splits,
                             const std::vector<Triple>& eval_split,
                             const EvalOptions& options) {
  TailFilter filter;
  if (options.protocol == Protocol::Filtered) {
    filter.add(all_splits.train);
    filter.add(all_splits.valid);
    filter.add(all_splits.test);
  }
  Scorer scorer = [&](const Triple& q) {
    InputSequence seq =
        build_input_sequence(q.head, cache.head(q.head), q.relation,
                             cache.relation(q.relation), cfg.max_len);
    return predict_tail_distribution(params, cfg, seq);
  };
  return evaluate_queries(scorer, eval_split, &filter, options);
}

}  // namespace cabkgc
