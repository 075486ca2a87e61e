#include "cabkgc/context.hpp"

#include <algorithm>
#include <unordered_set>

#include "cabkgc/errors.hpp"

namespace cabkgc {

ContextSet relations_of_head(const KnowledgeGraph& g, EntityId head) {
  ContextSet ctx;
  // outgoing() is sorted by (relation, tail), so distinct relations come out
  // already ascending.
  RelationId last{std::numeric_limits<std::uint32_t>::max()};
  for (const auto& [relation, tail] : g.outgoing(head)) {
    if (ctx.symbols.empty() || relation != last) {
      ctx.symbols.push_back(ContextSymbol::relation(relation));
      last = relation;
    }
  }
  return ctx;
}

ContextSet neighbors_of_head(const KnowledgeGraph& g, EntityId head) {
  std::vector<std::uint32_t> ids;
  for (const auto& [relation, tail] : g.outgoing(head)) {
    if (tail != head) ids.push_back(tail.value);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  ContextSet ctx;
  ctx.symbols.reserve(ids.size());
  for (auto id : ids) ctx.symbols.push_back(ContextSymbol::entity(EntityId{id}));
  return ctx;
}

ContextSet head_context(const KnowledgeGraph& g, EntityId head,
                        std::size_t budget) {
  ContextSet ctx = relations_of_head(g, head);
  ContextSet neighbors = neighbors_of_head(g, head);
  ctx.symbols.insert(ctx.symbols.end(), neighbors.symbols.begin(),
                     neighbors.symbols.end());
  return truncate_context(std::move(ctx), budget);
}

ContextSet relation_context(const KnowledgeGraph& g, RelationId relation,
                            std::size_t budget) {
  ContextSet ctx;
  std::unordered_set<std::uint32_t> seen;
  auto push = [&](EntityId e) {
    if (seen.insert(e.value).second) {
      ctx.symbols.push_back(ContextSymbol::entity(e));
    }
  };
  for (const auto& [head, tail] : g.pairs_of(relation)) {
    push(head);
    push(tail);
  }
  return truncate_context(std::move(ctx), budget);
}

ContextSet truncate_context(ContextSet ctx, std::size_t budget) {
  if (ctx.symbols.size() > budget) {
    ctx.symbols.resize(budget);
    ctx.truncated = true;
  }
  return ctx;
}

std::string render_context(const ContextSet& ctx, const Vocabulary& vocab) {
  std::string out;
  for (const ContextSymbol& s : ctx.symbols) {
    if (s.kind == SymbolKind::Entity) {
      out += "E:" + vocab.entity_name(s.as_entity());
    } else {
      out += "R:" + vocab.relation_name(s.as_relation());
    }
    out += '\n';
  }
  return out;
}

ContextCache::ContextCache(const KnowledgeGraph& g, ContextBudgets budgets)
    : budgets_(budgets) {
  head_contexts_.reserve(g.entity_capacity());
  for (std::size_t e = 0; e < g.entity_capacity(); ++e) {
    head_contexts_.push_back(
        head_context(g, EntityId{static_cast<std::uint32_t>(e)}, budgets.head));
  }
  relation_contexts_.reserve(g.relation_capacity());
  for (std::size_t r = 0; r < g.relation_capacity(); ++r) {
    relation_contexts_.push_back(relation_context(
        g, RelationId{static_cast<std::uint32_t>(r)}, budgets.relation));
  }
}

const ContextSet& ContextCache::head(EntityId id) const {
  if (id.value >= head_contexts_.size()) {
    throw IndexOutOfRange("head context id out of range");
  }
  return head_contexts_[id.value];
}

const ContextSet& ContextCache::relation(RelationId id) const {
  if (id.value >= relation_contexts_.size()) {
    throw IndexOutOfRange("relation context id out of range");
  }
  return relation_contexts_[id.value];
}

}  // namespace cabkgc
