#include "cabkgc/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cabkgc/errors.hpp"

namespace cabkgc {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'B', 'K'};

std::uint64_t fnv1a64(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void append_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  append_u64(out, bits);
}

void append_string(std::string& out, const std::string& s) {
  append_u64(out, s.size());
  out.append(s);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string str() {
    std::uint64_t n = u64();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  bool exhausted() const { return pos_ == end_; }

 private:
  void need(std::uint64_t n) {
    if (n > end_ - pos_) {
      throw FormatVersionMismatch("checkpoint structure inconsistent");
    }
  }

  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::map<std::string, std::string> config_header(
    const ModelConfig& cfg, std::uint64_t dataset_fingerprint) {
  std::map<std::string, std::string> kv;
  kv["d_model"] = std::to_string(cfg.d_model);
  kv["n_layers"] = std::to_string(cfg.n_layers);
  kv["n_heads"] = std::to_string(cfg.n_heads);
  kv["ff_dim"] = std::to_string(cfg.ff_dim);
  kv["max_len"] = std::to_string(cfg.max_len);
  kv["token_vocab_size"] = std::to_string(cfg.token_vocab_size);
  kv["entity_count"] = std::to_string(cfg.entity_count);
  kv["dropout"] = format_double(cfg.dropout);
  kv["seed"] = std::to_string(cfg.seed);
  kv["dataset_fingerprint"] = std::to_string(dataset_fingerprint);
  kv["token_layout_version"] = std::to_string(kTokenLayoutVersion);
  return kv;
}

const std::string& header_value(
    const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw FormatVersionMismatch("checkpoint header missing key '" + key + "'");
  }
  return it->second;
}

std::uint64_t parse_u64(const std::string& s) {
  try {
    std::size_t used = 0;
    std::uint64_t v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatVersionMismatch("checkpoint header value '" + s +
                                "' is not an integer");
  }
}

}  // namespace

void save_checkpoint(const Parameters& params, const ModelConfig& cfg,
                     std::uint64_t dataset_fingerprint,
                     const std::filesystem::path& path) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  append_u32(out, kCheckpointFormatVersion);

  auto kv = config_header(cfg, dataset_fingerprint);
  append_u64(out, kv.size());
  for (const auto& [key, value] : kv) {  // std::map iterates in sorted order
    append_string(out, key);
    append_string(out, value);
  }

  auto tensors = named_tensors(params);
  append_u64(out, tensors.size());
  for (const auto& nt : tensors) {
    append_string(out, nt.name);
    append_u64(out, 2);  // rank
    append_u64(out, static_cast<std::uint64_t>(nt.tensor->rows()));
    append_u64(out, static_cast<std::uint64_t>(nt.tensor->cols()));
    for (Eigen::Index r = 0; r < nt.tensor->rows(); ++r) {
      for (Eigen::Index c = 0; c < nt.tensor->cols(); ++c) {
        append_f64(out, (*nt.tensor)(r, c));
      }
    }
  }

  append_u64(out, fnv1a64(out.data(), out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw IoError("cannot open checkpoint file for writing: " + path.string());
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) {
    throw IoError("failed writing checkpoint file: " + path.string());
  }
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open checkpoint file: " + path.string());
  }
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (f.bad()) {
    throw IoError("failed reading checkpoint file: " + path.string());
  }

  if (data.size() < sizeof kMagic + 4 + 8) {
    throw ChecksumMismatch("checkpoint file truncated: " + path.string());
  }
  if (std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatVersionMismatch("not a checkpoint file (bad magic): " +
                                path.string());
  }

  Reader r(data, data.size() - 8);
  char magic[4];
  r.raw(magic, sizeof magic);
  std::uint32_t version = r.u32();
  if (version != kCheckpointFormatVersion) {
    throw FormatVersionMismatch("unsupported checkpoint format version " +
                                std::to_string(version));
  }

  std::uint64_t checksum = 0;
  for (int i = 0; i < 8; ++i) {
    checksum |= static_cast<std::uint64_t>(static_cast<unsigned char>(
                    data[data.size() - 8 + i]))
                << (8 * i);
  }
  if (fnv1a64(data.data(), data.size() - 8) != checksum) {
    throw ChecksumMismatch("checkpoint checksum mismatch: " + path.string());
  }

  std::uint64_t kv_count = r.u64();
  std::map<std::string, std::string> kv;
  for (std::uint64_t i = 0; i < kv_count; ++i) {
    std::string key = r.str();
    std::string value = r.str();
    kv[std::move(key)] = std::move(value);
  }

  CheckpointData out;
  out.config.d_model = static_cast<int>(parse_u64(header_value(kv, "d_model")));
  out.config.n_layers =
      static_cast<int>(parse_u64(header_value(kv, "n_layers")));
  out.config.n_heads = static_cast<int>(parse_u64(header_value(kv, "n_heads")));
  out.config.ff_dim = static_cast<int>(parse_u64(header_value(kv, "ff_dim")));
  out.config.max_len = parse_u64(header_value(kv, "max_len"));
  out.config.token_vocab_size =
      parse_u64(header_value(kv, "token_vocab_size"));
  out.config.entity_count = parse_u64(header_value(kv, "entity_count"));
  out.config.seed = parse_u64(header_value(kv, "seed"));
  out.config.dropout = std::strtod(header_value(kv, "dropout").c_str(), nullptr);
  out.dataset_fingerprint = parse_u64(header_value(kv, "dataset_fingerprint"));
  out.token_layout_version =
      static_cast<std::uint32_t>(parse_u64(header_value(kv, "token_layout_version")));
  if (out.token_layout_version != kTokenLayoutVersion) {
    throw FormatVersionMismatch("unsupported token layout version " +
                                std::to_string(out.token_layout_version));
  }
  try {
    out.config.validate();
  } catch (const InvalidConfig& e) {
    throw FormatVersionMismatch(std::string("checkpoint header invalid: ") +
                                e.what());
  }

  out.params = Parameters::zeros(out.config);
  auto tensors = named_tensors(out.params);
  std::unordered_map<std::string, Eigen::MatrixXd*> by_name;
  for (auto& nt : tensors) by_name[nt.name] = nt.tensor;

  std::uint64_t tensor_count = r.u64();
  if (tensor_count != tensors.size()) {
    throw FormatVersionMismatch("checkpoint tensor count mismatch");
  }
  for (std::uint64_t i = 0; i < tensor_count; ++i) {
    std::string name = r.str();
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw FormatVersionMismatch("unknown checkpoint tensor '" + name + "'");
    }
    std::uint64_t rank = r.u64();
    if (rank != 2) {
      throw FormatVersionMismatch("checkpoint tensor '" + name +
                                  "' has unsupported rank");
    }
    std::uint64_t rows = r.u64();
    std::uint64_t cols = r.u64();
    Eigen::MatrixXd& m = *it->second;
    if (rows != static_cast<std::uint64_t>(m.rows()) ||
        cols != static_cast<std::uint64_t>(m.cols())) {
      throw FormatVersionMismatch("checkpoint tensor '" + name +
                                  "' shape differs from header config");
    }
    for (std::uint64_t row = 0; row < rows; ++row) {
      for (std::uint64_t col = 0; col < cols; ++col) {
        m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
            r.f64();
      }
    }
  }
  if (!r.exhausted()) {
    throw FormatVersionMismatch("checkpoint has trailing bytes");
  }
  return out;
}

CheckpointData load_checkpoint(const std::filesystem::path& path,
                               std::uint64_t expected_fingerprint) {
  CheckpointData data = load_checkpoint(path);
  if (data.dataset_fingerprint != expected_fingerprint) {
    throw VocabularyMismatch(
        "checkpoint was written for a different dataset (fingerprint " +
        std::to_string(data.dataset_fingerprint) + ", expected " +
        std::to_string(expected_fingerprint) + ")");
  }
  return data;
}

}  // namespace cabkgc
