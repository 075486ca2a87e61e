#include "cabkgc/kg_store.hpp"

#include <algorithm>
#include <fstream>

#include "cabkgc/errors.hpp"

namespace cabkgc {

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ParsedTripleLine parse_triple_line(std::string_view line) {
  std::array<std::string_view, 3> fields;
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    std::string_view field = (tab == std::string_view::npos)
                                 ? line.substr(start)
                                 : line.substr(start, tab - start);
    if (count < 3) fields[count] = field;
    ++count;
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (count != 3) {
    throw MalformedLine("expected 3 tab-separated fields, got " +
                        std::to_string(count));
  }
  ParsedTripleLine out;
  std::array<std::string*, 3> dst{&out.head, &out.relation, &out.tail};
  for (std::size_t i = 0; i < 3; ++i) {
    auto t = trim(fields[i]);
    if (t.empty()) {
      throw MalformedLine("field " + std::to_string(i + 1) +
                          " empty after trimming");
    }
    *dst[i] = std::string(t);
  }
  return out;
}

namespace {

// Reads one split file, interning names in line order (head, tail for
// entities) and dropping duplicate triples.
std::vector<Triple> read_split(const std::filesystem::path& path,
                               Vocabulary& vocab, std::size_t& duplicates) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open triple file: " + path.string());
  }
  std::vector<Triple> triples;
  std::unordered_set<Triple, TripleHash> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    ParsedTripleLine parsed;
    try {
      parsed = parse_triple_line(line);
    } catch (const MalformedLine& e) {
      throw MalformedLine(path.string(), line_number, e.what());
    }
    Triple t;
    t.head = vocab.add_entity(parsed.head);
    t.relation = vocab.add_relation(parsed.relation);
    t.tail = vocab.add_entity(parsed.tail);
    if (seen.insert(t).second) {
      triples.push_back(t);
    } else {
      ++duplicates;
    }
  }
  if (in.bad()) {
    throw IoError("read error on triple file: " + path.string());
  }
  return triples;
}

}  // namespace

std::pair<Vocabulary, DatasetSplits> ingest_splits(
    const std::filesystem::path& train_path,
    const std::filesystem::path& valid_path,
    const std::filesystem::path& test_path) {
  Vocabulary vocab;
  DatasetSplits splits;
  splits.train = read_split(train_path, vocab, splits.duplicates_removed[0]);
  splits.valid = read_split(valid_path, vocab, splits.duplicates_removed[1]);
  splits.test = read_split(test_path, vocab, splits.duplicates_removed[2]);
  return {std::move(vocab), std::move(splits)};
}

KnowledgeGraph KnowledgeGraph::build(std::vector<Triple> triples,
                                     std::size_t num_entities,
                                     std::size_t num_relations) {
  KnowledgeGraph g;
  g.by_head_.resize(num_entities);
  g.by_relation_.resize(num_relations);
  g.membership_.reserve(triples.size());
  g.triples_.reserve(triples.size());
  for (const Triple& t : triples) {
    if (t.head.value >= num_entities || t.tail.value >= num_entities) {
      throw IndexOutOfRange("triple entity id out of range");
    }
    if (t.relation.value >= num_relations) {
      throw IndexOutOfRange("triple relation id out of range");
    }
    if (!g.membership_.insert(t).second) {
      ++g.duplicates_removed_;
      continue;
    }
    g.triples_.push_back(t);
    g.by_head_[t.head.value].emplace_back(t.relation, t.tail);
    g.by_relation_[t.relation.value].emplace_back(t.head, t.tail);
  }
  for (auto& entries : g.by_head_) {
    std::sort(entries.begin(), entries.end(),
              [](const HeadEntry& a, const HeadEntry& b) {
                return std::pair(a.first.value, a.second.value) <
                       std::pair(b.first.value, b.second.value);
              });
  }
  for (auto& entries : g.by_relation_) {
    std::sort(entries.begin(), entries.end(),
              [](const RelationEntry& a, const RelationEntry& b) {
                return std::pair(a.first.value, a.second.value) <
                       std::pair(b.first.value, b.second.value);
              });
  }
  return g;
}

std::span<const KnowledgeGraph::HeadEntry> KnowledgeGraph::outgoing(
    EntityId head) const {
  if (head.value >= by_head_.size()) {
    throw IndexOutOfRange("head entity id " + std::to_string(head.value) +
                          " out of range");
  }
  return by_head_[head.value];
}

std::span<const KnowledgeGraph::RelationEntry> KnowledgeGraph::pairs_of(
    RelationId relation) const {
  if (relation.value >= by_relation_.size()) {
    throw IndexOutOfRange("relation id " + std::to_string(relation.value) +
                          " out of range");
  }
  return by_relation_[relation.value];
}

GraphStats KnowledgeGraph::stats() const {
  GraphStats s;
  s.num_triples = triples_.size();
  std::vector<bool> entity_seen(by_head_.size(), false);
  std::vector<bool> relation_seen(by_relation_.size(), false);
  for (const Triple& t : triples_) {
    entity_seen[t.head.value] = true;
    entity_seen[t.tail.value] = true;
    relation_seen[t.relation.value] = true;
  }
  s.num_entities = std::count(entity_seen.begin(), entity_seen.end(), true);
  s.num_relations =
      std::count(relation_seen.begin(), relation_seen.end(), true);
  return s;
}

std::vector<Triple> augment_with_inverse_triples(std::vector<Triple> triples) {
  std::size_t n = triples.size();
  triples.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Triple& t = triples[i];
    triples.push_back(Triple{t.tail, t.relation, t.head});
  }
  return triples;
}

}  // namespace cabkgc
