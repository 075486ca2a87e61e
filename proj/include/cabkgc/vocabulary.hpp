#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cabkgc/types.hpp"

namespace cabkgc {

// Bijective string <-> dense-id maps for entities and relations. Ids are
// assigned in insertion order and stay contiguous.
class Vocabulary {
 public:
  // Insert-or-lookup; returns the existing id when the name is known.
  EntityId add_entity(const std::string& name);
  RelationId add_relation(const std::string& name);

  std::optional<EntityId> entity_id(const std::string& name) const;
  std::optional<RelationId> relation_id(const std::string& name) const;

  // Throw IndexOutOfRange for ids outside the vocabulary.
  const std::string& entity_name(EntityId id) const;
  const std::string& relation_name(RelationId id) const;

  std::size_t entity_count() const { return entity_names_.size(); }
  std::size_t relation_count() const { return relation_names_.size(); }

  // Order-sensitive 64-bit hash over all names; used as the checkpoint's
  // dataset fingerprint.
  std::uint64_t fingerprint() const;

 private:
  std::unordered_map<std::string, EntityId> entity_by_name_;
  std::vector<std::string> entity_names_;
  std::unordered_map<std::string, RelationId> relation_by_name_;
  std::vector<std::string> relation_names_;
};

}  // namespace cabkgc
