#include "cabkgc/vocabulary.hpp"

#include "cabkgc/errors.hpp"

namespace cabkgc {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

void fnv_string(std::uint64_t& h, const std::string& s) {
  std::uint64_t len = s.size();
  fnv_bytes(h, &len, sizeof(len));
  fnv_bytes(h, s.data(), s.size());
}

}  // namespace

EntityId Vocabulary::add_entity(const std::string& name) {
  auto it = entity_by_name_.find(name);
  if (it != entity_by_name_.end()) return it->second;
  EntityId id{static_cast<std::uint32_t>(entity_names_.size())};
  entity_by_name_.emplace(name, id);
  entity_names_.push_back(name);
  return id;
}

RelationId Vocabulary::add_relation(const std::string& name) {
  auto it = relation_by_name_.find(name);
  if (it != relation_by_name_.end()) return it->second;
  RelationId id{static_cast<std::uint32_t>(relation_names_.size())};
  relation_by_name_.emplace(name, id);
  relation_names_.push_back(name);
  return id;
}

std::optional<EntityId> Vocabulary::entity_id(const std::string& name) const {
  auto it = entity_by_name_.find(name);
  if (it == entity_by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocabulary::relation_id(
    const std::string& name) const {
  auto it = relation_by_name_.find(name);
  if (it == relation_by_name_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::entity_name(EntityId id) const {
  if (id.value >= entity_names_.size()) {
    throw IndexOutOfRange("entity id " + std::to_string(id.value) +
                          " out of range (|E| = " +
                          std::to_string(entity_names_.size()) + ")");
  }
  return entity_names_[id.value];
}

const std::string& Vocabulary::relation_name(RelationId id) const {
  if (id.value >= relation_names_.size()) {
    throw IndexOutOfRange("relation id " + std::to_string(id.value) +
                          " out of range (|R| = " +
                          std::to_string(relation_names_.size()) + ")");
  }
  return relation_names_[id.value];
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  std::uint64_t ne = entity_names_.size();
  fnv_bytes(h, &ne, sizeof(ne));
  for (const auto& name : entity_names_) fnv_string(h, name);
  std::uint64_t nr = relation_names_.size();
  fnv_bytes(h, &nr, sizeof(nr));
  for (const auto& name : relation_names_) fnv_string(h, name);
  return h;
}

}  // namespace cabkgc
