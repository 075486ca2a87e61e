#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cabkgc/types.hpp"
#include "cabkgc/vocabulary.hpp"

namespace cabkgc {

struct ParsedTripleLine {
  std::string head;
  std::string relation;
  std::string tail;
};

// Split a triple-file line on tabs into (head, relation, tail), trimming
// surrounding whitespace per field. Throws MalformedLine on wrong field count
// or an empty field.
ParsedTripleLine parse_triple_line(std::string_view line);

struct DatasetSplits {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  // Duplicate lines dropped per split, in (train, valid, test) order.
  std::array<std::size_t, 3> duplicates_removed{0, 0, 0};
};

// Read the three split files and build one vocabulary over their union
// (transductive setting). Ids are assigned in first-occurrence order scanning
// train, then valid, then test; duplicate triples within a split are dropped
// and counted.
std::pair<Vocabulary, DatasetSplits> ingest_splits(
    const std::filesystem::path& train_path,
    const std::filesystem::path& valid_path,
    const std::filesystem::path& test_path);

struct GraphStats {
  std::size_t num_entities = 0;   // distinct entities appearing in triples
  std::size_t num_relations = 0;  // distinct relations appearing in triples
  std::size_t num_triples = 0;
};

// Immutable triple store with adjacency indexes for O(1) context lookup.
// After build() returns the graph is safely shareable across readers.
class KnowledgeGraph {
 public:
  using HeadEntry = std::pair<RelationId, EntityId>;   // (relation, tail)
  using RelationEntry = std::pair<EntityId, EntityId>; // (head, tail)

  // Deduplicates silently (count retrievable), validates ids against the
  // given vocabulary sizes, and sorts every index list ascending for
  // deterministic downstream ordering.
  static KnowledgeGraph build(std::vector<Triple> triples,
                              std::size_t num_entities,
                              std::size_t num_relations);

  bool contains(const Triple& t) const { return membership_.contains(t); }

  const std::vector<Triple>& triples() const { return triples_; }

  std::span<const HeadEntry> outgoing(EntityId head) const;
  std::span<const RelationEntry> pairs_of(RelationId relation) const;

  std::size_t entity_capacity() const { return by_head_.size(); }
  std::size_t relation_capacity() const { return by_relation_.size(); }
  std::size_t duplicates_removed() const { return duplicates_removed_; }

  GraphStats stats() const;

 private:
  std::vector<Triple> triples_;
  std::vector<std::vector<HeadEntry>> by_head_;
  std::vector<std::vector<RelationEntry>> by_relation_;
  std::unordered_set<Triple, TripleHash> membership_;
  std::size_t duplicates_removed_ = 0;
};

inline bool contains_triple(const KnowledgeGraph& g, EntityId h, RelationId r,
                            EntityId t) {
  return g.contains(Triple{h, r, t});
}

// Optional context mode: mirror every (h, r, t) as (t, r, h) so head contexts
// also see incoming edges. Off by default; feed the result to
// KnowledgeGraph::build.
std::vector<Triple> augment_with_inverse_triples(std::vector<Triple> triples);

}  // namespace cabkgc
