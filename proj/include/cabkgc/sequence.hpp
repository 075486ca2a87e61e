#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cabkgc/context.hpp"
#include "cabkgc/types.hpp"
#include "cabkgc/vocabulary.hpp"

namespace cabkgc {

enum class TokenKind : std::uint8_t { Cls, Sep, Pad, Entity, Relation };

struct Token {
  TokenKind kind = TokenKind::Pad;
  std::uint32_t raw = 0;  // entity/relation id; 0 for specials

  static Token cls() { return {TokenKind::Cls, 0}; }
  static Token sep() { return {TokenKind::Sep, 0}; }
  static Token pad() { return {TokenKind::Pad, 0}; }
  static Token entity(EntityId id) { return {TokenKind::Entity, id.value}; }
  static Token relation(RelationId id) {
    return {TokenKind::Relation, id.value};
  }

  friend constexpr auto operator<=>(const Token&, const Token&) = default;
};

// Fixed flat-id layout, part of the checkpoint contract:
//   CLS = 0, SEP = 1, PAD = 2,
//   entity e   -> 3 + e,
//   relation r -> 3 + |E| + r,
// so the token vocabulary has |E| + |R| + 3 ids.
struct TokenLayout {
  std::size_t entity_count = 0;
  std::size_t relation_count = 0;

  std::size_t vocab_size() const { return entity_count + relation_count + 3; }
  std::uint32_t flat_id(const Token& t) const;
  Token token_at(std::uint32_t flat) const;
};

inline constexpr std::uint32_t kTokenLayoutVersion = 1;

// Fixed-length token sequence: [CLS] h, H_c [SEP] r, R_c then PAD.
struct InputSequence {
  std::vector<Token> tokens;     // size == max_len
  std::size_t content_length = 0;

  std::size_t max_len() const { return tokens.size(); }
  friend bool operator==(const InputSequence&, const InputSequence&) = default;
};

// Serialize (h, hc, r, rc) into the classifier input layout. When the parts
// exceed max_len, hc and rc are re-truncated to equal shares of the budget
// left after [CLS] h [SEP] r (hc takes the extra slot when odd); those four
// tokens are never dropped. Throws SequenceTooShort if max_len < 4.
InputSequence build_input_sequence(EntityId h, const ContextSet& hc,
                                   RelationId r, const ContextSet& rc,
                                   std::size_t max_len);

// Binary segment index per position: 0 up to and including [SEP], 1 after.
std::vector<std::uint8_t> segment_indices(const InputSequence& seq);

// Space-joined human-readable form; the all-PAD tail is omitted. Entity and
// relation tokens render as their raw names; a name present in both
// vocabularies gets an "E:"/"R:" kind prefix so lexing stays unambiguous.
std::string render_sequence(const InputSequence& seq, const Vocabulary& vocab);

// Inverse of render_sequence (modulo the PAD tail).
std::vector<Token> lex_rendered_sequence(const std::string& text,
                                         const Vocabulary& vocab);

}  // namespace cabkgc
