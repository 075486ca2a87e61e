#include <doctest.h>

#include <string>
#include <vector>

#include "cabkgc/errors.hpp"
#include "cabkgc/sequence.hpp"

using namespace cabkgc;

namespace {

ContextSet ctx_of(std::vector<ContextSymbol> symbols) {
  ContextSet out;
  out.symbols = std::move(symbols);
  return out;
}

ContextSymbol E(std::uint32_t id) { return ContextSymbol::entity(EntityId{id}); }
ContextSymbol R(std::uint32_t id) {
  return ContextSymbol::relation(RelationId{id});
}

}  // namespace

TEST_CASE("token layout is the frozen checkpoint contract") {
  const TokenLayout layout{4, 3};
  CHECK(layout.vocab_size() == 10);  // |E| + |R| + 3
  CHECK(layout.flat_id(Token::cls()) == 0);
  CHECK(layout.flat_id(Token::sep()) == 1);
  CHECK(layout.flat_id(Token::pad()) == 2);
  CHECK(layout.flat_id(Token::entity(EntityId{0})) == 3);
  CHECK(layout.flat_id(Token::entity(EntityId{3})) == 6);
  CHECK(layout.flat_id(Token::relation(RelationId{0})) == 7);
  CHECK(layout.flat_id(Token::relation(RelationId{2})) == 9);
  for (std::uint32_t flat = 0; flat < layout.vocab_size(); ++flat) {
    CHECK(layout.flat_id(layout.token_at(flat)) == flat);
  }
}

TEST_CASE("build_input_sequence lays out CLS h Hc SEP r Rc PAD") {
  // Frozen example: h=A(0), hc=[r1,r2,B,C], r=r1(0), rc=[A,B,C,D], max_len=16
  // -> [CLS, A, r1, r2, B, C, SEP, r1, A, B, C, D, PAD x4], content 12.
  const ContextSet hc = ctx_of({R(0), R(1), E(1), E(2)});
  const ContextSet rc = ctx_of({E(0), E(1), E(2), E(3)});
  const InputSequence seq =
      build_input_sequence(EntityId{0}, hc, RelationId{0}, rc, 16);

  const std::vector<Token> expected = {
      Token::cls(),           Token::entity(EntityId{0}),
      Token::relation(RelationId{0}), Token::relation(RelationId{1}),
      Token::entity(EntityId{1}),     Token::entity(EntityId{2}),
      Token::sep(),           Token::relation(RelationId{0}),
      Token::entity(EntityId{0}),     Token::entity(EntityId{1}),
      Token::entity(EntityId{2}),     Token::entity(EntityId{3}),
      Token::pad(),           Token::pad(),
      Token::pad(),           Token::pad()};
  CHECK(seq.tokens == expected);
  CHECK(seq.content_length == 12);
  CHECK(seq.max_len() == 16);
}

TEST_CASE("build_input_sequence with empty contexts") {
  // Frozen example: empty contexts, max_len=8 -> [CLS, A, SEP, r2, PAD x4].
  const InputSequence seq = build_input_sequence(EntityId{0}, ContextSet{},
                                                 RelationId{1}, ContextSet{}, 8);
  const std::vector<Token> expected = {
      Token::cls(), Token::entity(EntityId{0}), Token::sep(),
      Token::relation(RelationId{1}), Token::pad(), Token::pad(),
      Token::pad(), Token::pad()};
  CHECK(seq.tokens == expected);
  CHECK(seq.content_length == 4);
}

TEST_CASE("build_input_sequence re-truncates to equal shares") {
  // Frozen example: 10 hc symbols + 10 rc symbols, max_len=10 -> the four
  // fixed tokens survive and each context keeps 3 symbols.
  std::vector<ContextSymbol> many_h, many_r;
  for (std::uint32_t i = 0; i < 10; ++i) many_h.push_back(E(i));
  for (std::uint32_t i = 10; i < 20; ++i) many_r.push_back(E(i));
  const InputSequence seq = build_input_sequence(
      EntityId{20}, ctx_of(many_h), RelationId{0}, ctx_of(many_r), 10);

  CHECK(seq.content_length == 10);
  CHECK(seq.tokens[0] == Token::cls());
  CHECK(seq.tokens[1] == Token::entity(EntityId{20}));
  CHECK(seq.tokens[2] == Token::entity(EntityId{0}));
  CHECK(seq.tokens[3] == Token::entity(EntityId{1}));
  CHECK(seq.tokens[4] == Token::entity(EntityId{2}));
  CHECK(seq.tokens[5] == Token::sep());
  CHECK(seq.tokens[6] == Token::relation(RelationId{0}));
  CHECK(seq.tokens[7] == Token::entity(EntityId{10}));
  CHECK(seq.tokens[8] == Token::entity(EntityId{11}));
  CHECK(seq.tokens[9] == Token::entity(EntityId{12}));
}

TEST_CASE("build_input_sequence gives hc the odd remaining slot") {
  // Room after fixed tokens = 9 -> hc keeps 5, rc keeps 4.
  std::vector<ContextSymbol> many_h, many_r;
  for (std::uint32_t i = 0; i < 10; ++i) many_h.push_back(E(i));
  for (std::uint32_t i = 10; i < 20; ++i) many_r.push_back(E(i));
  const InputSequence seq = build_input_sequence(
      EntityId{20}, ctx_of(many_h), RelationId{0}, ctx_of(many_r), 13);
  CHECK(seq.content_length == 13);
  CHECK(seq.tokens[6] == Token::entity(EntityId{4}));  // 5th hc symbol
  CHECK(seq.tokens[7] == Token::sep());
  CHECK(seq.tokens[12] == Token::entity(EntityId{13}));  // 4th rc symbol
}

TEST_CASE("re-truncation shares are fixed, not donated") {
  // hc empty, rc long: once the layout overflows, each context is capped at
  // its own equal share of the remaining budget.
  std::vector<ContextSymbol> many_r;
  for (std::uint32_t i = 0; i < 10; ++i) many_r.push_back(E(i));
  const InputSequence seq = build_input_sequence(
      EntityId{20}, ContextSet{}, RelationId{0}, ctx_of(many_r), 10);
  CHECK(seq.content_length == 7);  // CLS, h, SEP, r + 3 rc symbols
  CHECK(seq.tokens[2] == Token::sep());
  CHECK(seq.tokens[6] == Token::entity(EntityId{2}));
  CHECK(seq.tokens[7] == Token::pad());
}

TEST_CASE("build_input_sequence rejects max_len below 4") {
  CHECK_THROWS_AS(build_input_sequence(EntityId{0}, ContextSet{}, RelationId{0},
                                       ContextSet{}, 3),
                  SequenceTooShort);
}

TEST_CASE("segment_indices flip after SEP") {
  const ContextSet hc = ctx_of({R(0), E(1)});
  const ContextSet rc = ctx_of({E(0)});
  const InputSequence seq =
      build_input_sequence(EntityId{0}, hc, RelationId{0}, rc, 8);
  // [CLS, A, r1, B, SEP, r1, A, PAD]
  const std::vector<std::uint8_t> expected = {0, 0, 0, 0, 0, 1, 1, 1};
  CHECK(segment_indices(seq) == expected);
}

TEST_CASE("render_sequence matches the frozen format and omits the PAD tail") {
  Vocabulary v;
  v.add_entity("A");
  v.add_relation("r1");
  const InputSequence seq = build_input_sequence(EntityId{0}, ContextSet{},
                                                 RelationId{0}, ContextSet{}, 8);
  // Frozen example: "[CLS] A [SEP] r1".
  CHECK(render_sequence(seq, v) == "[CLS] A [SEP] r1");
}

TEST_CASE("structural invariants hold for random context sizes") {
  for (std::size_t n_hc = 0; n_hc <= 12; n_hc += 3) {
    for (std::size_t n_rc = 0; n_rc <= 12; n_rc += 4) {
      for (std::size_t max_len : {4, 5, 9, 16, 40}) {
        std::vector<ContextSymbol> hs, rs;
        for (std::uint32_t i = 0; i < n_hc; ++i) hs.push_back(E(i));
        for (std::uint32_t i = 0; i < n_rc; ++i) rs.push_back(R(i));
        const InputSequence seq = build_input_sequence(
            EntityId{99}, ctx_of(hs), RelationId{42}, ctx_of(rs), max_len);
        REQUIRE(seq.tokens.size() == max_len);
        CHECK(seq.content_length <= max_len);
        CHECK(seq.tokens[0] == Token::cls());
        CHECK(seq.tokens[1] == Token::entity(EntityId{99}));
        std::size_t sep_count = 0, sep_pos = 0;
        for (std::size_t i = 0; i < seq.content_length; ++i) {
          if (seq.tokens[i].kind == TokenKind::Sep) {
            ++sep_count;
            sep_pos = i;
          }
        }
        CHECK(sep_count == 1);
        CHECK(seq.tokens[sep_pos + 1] == Token::relation(RelationId{42}));
        for (std::size_t i = seq.content_length; i < max_len; ++i) {
          CHECK(seq.tokens[i] == Token::pad());
        }
      }
    }
  }
}

TEST_CASE("render/lex round trip, including ambiguous names") {
  Vocabulary v;
  v.add_entity("A");
  v.add_entity("same");  // present in both vocabularies
  v.add_relation("r1");
  v.add_relation("same");

  const ContextSet hc = ctx_of({R(1), E(1)});
  const ContextSet rc = ctx_of({E(0), E(1)});
  const InputSequence seq =
      build_input_sequence(EntityId{0}, hc, RelationId{0}, rc, 12);

  const std::string text = render_sequence(seq, v);
  const std::vector<Token> lexed = lex_rendered_sequence(text, v);
  const std::vector<Token> content(seq.tokens.begin(),
                                   seq.tokens.begin() + seq.content_length);
  CHECK(lexed == content);
}
