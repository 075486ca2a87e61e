#include "cabkgc/sequence.hpp"

#include <sstream>

#include "cabkgc/errors.hpp"

namespace cabkgc {

std::uint32_t TokenLayout::flat_id(const Token& t) const {
  switch (t.kind) {
    case TokenKind::Cls:
      return 0;
    case TokenKind::Sep:
      return 1;
    case TokenKind::Pad:
      return 2;
    case TokenKind::Entity:
      if (t.raw >= entity_count) {
        throw IndexOutOfRange("entity token id out of range");
      }
      return 3 + t.raw;
    case TokenKind::Relation:
      if (t.raw >= relation_count) {
        throw IndexOutOfRange("relation token id out of range");
      }
      return static_cast<std::uint32_t>(3 + entity_count + t.raw);
  }
  throw IndexOutOfRange("invalid token kind");
}

Token TokenLayout::token_at(std::uint32_t flat) const {
  if (flat == 0) return Token::cls();
  if (flat == 1) return Token::sep();
  if (flat == 2) return Token::pad();
  if (flat < 3 + entity_count) return Token::entity(EntityId{flat - 3});
  if (flat < vocab_size()) {
    return Token::relation(
        RelationId{static_cast<std::uint32_t>(flat - 3 - entity_count)});
  }
  throw IndexOutOfRange("flat token id out of range");
}

namespace {

Token to_token(const ContextSymbol& s) {
  return s.kind == SymbolKind::Entity ? Token::entity(s.as_entity())
                                      : Token::relation(s.as_relation());
}

}  // namespace

InputSequence build_input_sequence(EntityId h, const ContextSet& hc,
                                   RelationId r, const ContextSet& rc,
                                   std::size_t max_len) {
  if (max_len < 4) {
    throw SequenceTooShort("max_len must be at least 4 (CLS, h, SEP, r), got " +
                           std::to_string(max_len));
  }
  std::size_t hc_keep = hc.size();
  std::size_t rc_keep = rc.size();
  if (4 + hc_keep + rc_keep > max_len) {
    std::size_t remaining = max_len - 4;
    std::size_t hc_share = (remaining + 1) / 2;  // hc gets the odd slot
    std::size_t rc_share = remaining / 2;
    hc_keep = std::min(hc_keep, hc_share);
    rc_keep = std::min(rc_keep, rc_share);
  }
  InputSequence seq;
  seq.tokens.reserve(max_len);
  seq.tokens.push_back(Token::cls());
  seq.tokens.push_back(Token::entity(h));
  for (std::size_t i = 0; i < hc_keep; ++i) {
    seq.tokens.push_back(to_token(hc.symbols[i]));
  }
  seq.tokens.push_back(Token::sep());
  seq.tokens.push_back(Token::relation(r));
  for (std::size_t i = 0; i < rc_keep; ++i) {
    seq.tokens.push_back(to_token(rc.symbols[i]));
  }
  seq.content_length = seq.tokens.size();
  seq.tokens.resize(max_len, Token::pad());
  return seq;
}

std::vector<std::uint8_t> segment_indices(const InputSequence& seq) {
  std::vector<std::uint8_t> segments(seq.max_len(), 1);
  for (std::size_t i = 0; i < seq.max_len(); ++i) {
    segments[i] = 0;
    if (seq.tokens[i].kind == TokenKind::Sep) break;
  }
  return segments;
}

namespace {

// A raw name is not self-describing when it exists in both vocabularies,
// when it looks like a kind prefix, or when it shadows a special token;
// those render with an explicit E:/R: prefix.
bool needs_kind_prefix(const std::string& name, bool in_other_vocab) {
  return in_other_vocab || name.starts_with("E:") || name.starts_with("R:") ||
         name == "[CLS]" || name == "[SEP]" || name == "[PAD]";
}

}  // namespace

std::string render_sequence(const InputSequence& seq,
                            const Vocabulary& vocab) {
  std::ostringstream out;
  bool first = true;
  for (std::size_t i = 0; i < seq.content_length; ++i) {
    const Token& t = seq.tokens[i];
    if (!first) out << ' ';
    first = false;
    switch (t.kind) {
      case TokenKind::Cls:
        out << "[CLS]";
        break;
      case TokenKind::Sep:
        out << "[SEP]";
        break;
      case TokenKind::Pad:
        out << "[PAD]";
        break;
      case TokenKind::Entity: {
        const std::string& name = vocab.entity_name(EntityId{t.raw});
        if (needs_kind_prefix(name, vocab.relation_id(name).has_value())) {
          out << "E:";
        }
        out << name;
        break;
      }
      case TokenKind::Relation: {
        const std::string& name = vocab.relation_name(RelationId{t.raw});
        if (needs_kind_prefix(name, vocab.entity_id(name).has_value())) {
          out << "R:";
        }
        out << name;
        break;
      }
    }
  }
  return out.str();
}

std::vector<Token> lex_rendered_sequence(const std::string& text,
                                         const Vocabulary& vocab) {
  std::vector<Token> tokens;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    if (word == "[CLS]") {
      tokens.push_back(Token::cls());
    } else if (word == "[SEP]") {
      tokens.push_back(Token::sep());
    } else if (word == "[PAD]") {
      tokens.push_back(Token::pad());
    } else if (word.starts_with("E:") &&
               vocab.entity_id(word.substr(2)).has_value()) {
      tokens.push_back(Token::entity(*vocab.entity_id(word.substr(2))));
    } else if (word.starts_with("R:") &&
               vocab.relation_id(word.substr(2)).has_value()) {
      tokens.push_back(Token::relation(*vocab.relation_id(word.substr(2))));
    } else if (auto e = vocab.entity_id(word)) {
      tokens.push_back(Token::entity(*e));
    } else if (auto r = vocab.relation_id(word)) {
      tokens.push_back(Token::relation(*r));
    } else {
      throw IndexOutOfRange("unknown token in rendered sequence: " + word);
    }
  }
  return tokens;
}

}  // namespace cabkgc
