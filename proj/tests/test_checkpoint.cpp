#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cabkgc/checkpoint.hpp"
#include "cabkgc/errors.hpp"
#include "cabkgc/model.hpp"
#include "support/tmpdir.hpp"

using namespace cabkgc;

namespace {

ModelConfig tiny_cfg(std::uint64_t seed = 42) {
  ModelConfig cfg = ModelConfig::for_vocabulary(10, 4);
  cfg.d_model = 16;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.ff_dim = 32;
  cfg.max_len = 12;
  cfg.seed = seed;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

// Recompute the trailing FNV-1a 64 checksum after tampering with the body.
std::string refresh_checksum(std::string bytes) {
  REQUIRE(bytes.size() > 8);
  bytes.resize(bytes.size() - 8);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  for (int i = 0; i < 8; ++i) {
    bytes.push_back(char((h >> (8 * i)) & 0xff));
  }
  return bytes;
}

bool params_identical(const Parameters& a, const Parameters& b) {
  const auto ta = named_tensors(a);
  const auto tb = named_tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].tensor->rows() != tb[i].tensor->rows() ||
        ta[i].tensor->cols() != tb[i].tensor->cols() ||
        *ta[i].tensor != *tb[i].tensor) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  test_support::TempDir dir("ckpt");
  const ModelConfig cfg = tiny_cfg();
  const Parameters params = init_parameters(cfg);
  const auto path = dir.path() / "model.cabk";
  save_checkpoint(params, cfg, 0xfeedfaceULL, path);

  const CheckpointData data = load_checkpoint(path);
  // TRIVIAL: save then load -> bit-identical Parameters.
  CHECK(params_identical(params, data.params));
  CHECK(data.dataset_fingerprint == 0xfeedfaceULL);
  CHECK(data.token_layout_version == kTokenLayoutVersion);
  CHECK(data.config.d_model == cfg.d_model);
  CHECK(data.config.n_layers == cfg.n_layers);
  CHECK(data.config.n_heads == cfg.n_heads);
  CHECK(data.config.ff_dim == cfg.ff_dim);
  CHECK(data.config.max_len == cfg.max_len);
  CHECK(data.config.token_vocab_size == cfg.token_vocab_size);
  CHECK(data.config.entity_count == cfg.entity_count);
  CHECK(data.config.dropout == cfg.dropout);
  CHECK(data.config.seed == cfg.seed);
}

TEST_CASE("saving twice produces identical bytes") {
  test_support::TempDir dir("ckpt_det");
  const ModelConfig cfg = tiny_cfg();
  const Parameters params = init_parameters(cfg);
  save_checkpoint(params, cfg, 7, dir.path() / "a.cabk");
  save_checkpoint(params, cfg, 7, dir.path() / "b.cabk");
  const std::string a = slurp(dir.path() / "a.cabk");
  CHECK(!a.empty());
  CHECK(a == slurp(dir.path() / "b.cabk"));
}

TEST_CASE("truncated checkpoints raise ChecksumMismatch") {
  test_support::TempDir dir("ckpt_trunc");
  const ModelConfig cfg = tiny_cfg();
  save_checkpoint(init_parameters(cfg), cfg, 7, dir.path() / "full.cabk");
  const std::string full = slurp(dir.path() / "full.cabk");

  // TRIVIAL: truncated file -> ChecksumMismatch, at several cut points.
  for (std::size_t keep :
       {std::size_t{0}, std::size_t{5}, std::size_t{40}, full.size() - 9,
        full.size() - 1}) {
    spit(dir.path() / "cut.cabk", full.substr(0, keep));
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "cut.cabk"),
                    ChecksumMismatch);
  }
}

TEST_CASE("flipped payload bytes raise ChecksumMismatch") {
  test_support::TempDir dir("ckpt_flip");
  const ModelConfig cfg = tiny_cfg();
  save_checkpoint(init_parameters(cfg), cfg, 7, dir.path() / "full.cabk");
  std::string bytes = slurp(dir.path() / "full.cabk");
  bytes[bytes.size() / 2] = char(bytes[bytes.size() / 2] ^ 0x40);
  spit(dir.path() / "bad.cabk", bytes);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.cabk"), ChecksumMismatch);
}

TEST_CASE("wrong magic or version raise FormatVersionMismatch") {
  test_support::TempDir dir("ckpt_magic");
  const ModelConfig cfg = tiny_cfg();
  save_checkpoint(init_parameters(cfg), cfg, 7, dir.path() / "full.cabk");
  const std::string full = slurp(dir.path() / "full.cabk");

  std::string bad_magic = full;
  bad_magic[0] = 'X';
  spit(dir.path() / "magic.cabk", refresh_checksum(bad_magic));
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "magic.cabk"),
                  FormatVersionMismatch);

  std::string bad_version = full;
  bad_version[4] = char(kCheckpointFormatVersion + 1);
  spit(dir.path() / "version.cabk", refresh_checksum(bad_version));
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "version.cabk"),
                  FormatVersionMismatch);
}

TEST_CASE("checkpoints from a different dataset raise VocabularyMismatch") {
  test_support::TempDir dir("ckpt_vocab");
  const ModelConfig cfg = tiny_cfg();
  const auto path = dir.path() / "model.cabk";
  save_checkpoint(init_parameters(cfg), cfg, /*fingerprint=*/111, path);

  // TRIVIAL: checkpoint from different dataset -> VocabularyMismatch.
  CHECK_THROWS_AS(load_checkpoint(path, /*expected=*/222), VocabularyMismatch);
  CHECK_NOTHROW(load_checkpoint(path, 111));
}

TEST_CASE("missing checkpoint file raises IoError") {
  test_support::TempDir dir("ckpt_io");
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "absent.cabk"), IoError);
}

TEST_CASE("trailing garbage after the checksum is rejected") {
  test_support::TempDir dir("ckpt_tail");
  const ModelConfig cfg = tiny_cfg();
  save_checkpoint(init_parameters(cfg), cfg, 7, dir.path() / "full.cabk");
  std::string bytes = slurp(dir.path() / "full.cabk");
  bytes += std::string(16, '\0');
  spit(dir.path() / "tail.cabk", bytes);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "tail.cabk"), Error);
}
