#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace cabkgc {

// Dense index into the entity vocabulary: 0 <= value < |E|, no gaps.
struct EntityId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(const EntityId&, const EntityId&) = default;
};

// Dense index into the relation vocabulary: 0 <= value < |R|, no gaps.
struct RelationId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(const RelationId&,
                                    const RelationId&) = default;
};

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  friend constexpr auto operator<=>(const Triple&, const Triple&) = default;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}
}  // namespace detail

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t k = (std::uint64_t(t.head.value) << 40) ^
                      (std::uint64_t(t.relation.value) << 20) ^
                      std::uint64_t(t.tail.value);
    return static_cast<std::size_t>(detail::mix64(k));
  }
};

}  // namespace cabkgc

template <>
struct std::hash<cabkgc::EntityId> {
  std::size_t operator()(const cabkgc::EntityId& e) const {
    return std::hash<std::uint32_t>{}(e.value);
  }
};

template <>
struct std::hash<cabkgc::RelationId> {
  std::size_t operator()(const cabkgc::RelationId& r) const {
    return std::hash<std::uint32_t>{}(r.value);
  }
};
