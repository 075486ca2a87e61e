#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cabkgc/kg_store.hpp"
#include "cabkgc/types.hpp"

namespace cabkgc {

enum class SymbolKind : std::uint8_t { Entity, Relation };

struct ContextSymbol {
  SymbolKind kind;
  std::uint32_t raw;

  static ContextSymbol entity(EntityId id) {
    return {SymbolKind::Entity, id.value};
  }
  static ContextSymbol relation(RelationId id) {
    return {SymbolKind::Relation, id.value};
  }
  EntityId as_entity() const { return EntityId{raw}; }
  RelationId as_relation() const { return RelationId{raw}; }

  friend constexpr auto operator<=>(const ContextSymbol&,
                                    const ContextSymbol&) = default;
};

// Ordered, deduplicated symbol collection. `truncated` records whether a
// budget dropped anything.
struct ContextSet {
  std::vector<ContextSymbol> symbols;
  bool truncated = false;

  std::size_t size() const { return symbols.size(); }
  bool empty() const { return symbols.empty(); }
  friend bool operator==(const ContextSet&, const ContextSet&) = default;
};

inline constexpr std::size_t kUnlimitedBudget =
    std::numeric_limits<std::size_t>::max();

// Distinct relations on outgoing triples of `head`, ascending by relation id.
ContextSet relations_of_head(const KnowledgeGraph& g, EntityId head);

// Distinct tail entities on outgoing triples of `head`, ascending by entity
// id; `head` itself is excluded even under self-loops.
ContextSet neighbors_of_head(const KnowledgeGraph& g, EntityId head);

// Head context: relations_of_head followed by neighbors_of_head, truncated to
// `budget` (canonical-order prefix).
ContextSet head_context(const KnowledgeGraph& g, EntityId head,
                        std::size_t budget = kUnlimitedBudget);

// Relation context: all entities participating in triples of `relation`.
// Heads interleave before tails per triple in index order, first occurrence
// kept on dedup, then truncated to `budget`.
ContextSet relation_context(const KnowledgeGraph& g, RelationId relation,
                            std::size_t budget = kUnlimitedBudget);

// Keep the first `budget` symbols; idempotent.
ContextSet truncate_context(ContextSet ctx, std::size_t budget);

// Text form used by the CLI context dump: one symbol per line, "E:" or "R:"
// prefix plus the vocabulary name.
std::string render_context(const ContextSet& ctx, const Vocabulary& vocab);

struct ContextBudgets {
  std::size_t head = 32;
  std::size_t relation = 32;
};

// Budgeted contexts precomputed for every entity and relation of an immutable
// graph. Read-only after construction and safe to share across threads.
class ContextCache {
 public:
  ContextCache(const KnowledgeGraph& g, ContextBudgets budgets);

  const ContextSet& head(EntityId id) const;
  const ContextSet& relation(RelationId id) const;
  ContextBudgets budgets() const { return budgets_; }

 private:
  ContextBudgets budgets_;
  std::vector<ContextSet> head_contexts_;
  std::vector<ContextSet> relation_contexts_;
};

}  // namespace cabkgc
