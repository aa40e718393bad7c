#pragma once

// On-disk model checkpoint. A checkpoint is a directory holding
//
//   manifest.txt  format version, precision, vocabulary hash and size,
//                 hyperparameters, and one "param <name> <rows> <cols>" line
//                 per tensor in storage order
//   params.bin    every tensor's values concatenated, little-endian IEEE-754
//                 in the stored precision
//   vocab.txt     the vocabulary the embedding rows are indexed by
//
// Writing is deterministic, so equal parameters give byte-identical files.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "hmtl/corpus.hpp"
#include "hmtl/error.hpp"
#include "hmtl/model.hpp"

namespace hmtl {

inline constexpr int kCheckpointFormat = 1;

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, std::string_view key) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint64_t parse_unsigned(std::string_view text, std::string_view key, int base = 10) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v, base);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(key) + ": expected a nonnegative integer, got '" +
                      std::string(text) + "'");
  }
  return v;
}

inline DocCell parse_doc_cell(std::string_view text) {
  if (text == "elman") return DocCell::Elman;
  if (text == "lstm") return DocCell::Lstm;
  throw ConfigError("doc_cell: expected elman or lstm, got '" + std::string(text) + "'");
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof buf, h, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

// Hyperparameters as ordered key/value pairs, shared by the checkpoint
// manifest and the run configuration.
inline std::vector<std::pair<std::string, std::string>> hyper_entries(const HyperParams& hp) {
  return {{"embed_dim", std::to_string(hp.embed_dim)},
          {"turn_hidden", std::to_string(hp.turn_hidden)},
          {"turn_layers", std::to_string(hp.turn_layers)},
          {"doc_hidden", std::to_string(hp.doc_hidden)},
          {"doc_layers", std::to_string(hp.doc_layers)},
          {"doc_cell", std::string(doc_cell_name(hp.doc_cell))},
          {"dropout", format_double(hp.dropout)},
          {"learning_rate", format_double(hp.learning_rate)},
          {"max_epochs", std::to_string(hp.max_epochs)},
          {"batch_daily", std::to_string(hp.batch_daily)},
          {"batch_daic", std::to_string(hp.batch_daic)},
          {"seed", std::to_string(hp.seed)}};
}

// Applies one hyperparameter key; returns false when `key` is not one.
inline bool set_hyper(HyperParams& hp, std::string_view key, std::string_view value) {
  auto count = [&] { return static_cast<std::size_t>(parse_unsigned(value, key)); };
  if (key == "embed_dim") hp.embed_dim = count();
  else if (key == "turn_hidden") hp.turn_hidden = count();
  else if (key == "turn_layers") hp.turn_layers = count();
  else if (key == "doc_hidden") hp.doc_hidden = count();
  else if (key == "doc_layers") hp.doc_layers = count();
  else if (key == "doc_cell") hp.doc_cell = parse_doc_cell(value);
  else if (key == "dropout") hp.dropout = parse_double(value, key);
  else if (key == "learning_rate") hp.learning_rate = parse_double(value, key);
  else if (key == "max_epochs") hp.max_epochs = count();
  else if (key == "batch_daily") hp.batch_daily = count();
  else if (key == "batch_daic") hp.batch_daic = count();
  else if (key == "seed") hp.seed = parse_unsigned(value, key);
  else return false;
  return true;
}

namespace detail {

template <typename Real>
void write_le(std::ostream& out, Real v) {
  unsigned char bytes[sizeof(Real)];
  std::memcpy(bytes, &v, sizeof(Real));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(Real) / 2; ++i) std::swap(bytes[i], bytes[sizeof(Real) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(Real));
}

template <typename Real>
Real read_le(std::istream& in) {
  unsigned char bytes[sizeof(Real)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(Real));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(Real) / 2; ++i) std::swap(bytes[i], bytes[sizeof(Real) - 1 - i]);
  }
  Real v;
  std::memcpy(&v, bytes, sizeof(Real));
  return v;
}

template <typename Real>
constexpr int precision_bits() {
  static_assert(std::is_same_v<Real, float> || std::is_same_v<Real, double>);
  return std::is_same_v<Real, float> ? 32 : 64;
}

}  // namespace detail

template <typename Real>
void save_checkpoint(const std::filesystem::path& dir, const ModelParams<Real>& params,
                     const Vocabulary& vocab) {
  if (params.vocab_size() != vocab.size()) {
    throw ContractError("save_checkpoint: model has " + std::to_string(params.vocab_size()) +
                        " embedding rows, vocabulary " + std::to_string(vocab.size()));
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  std::ostringstream manifest;
  manifest << "format_version " << kCheckpointFormat << '\n';
  manifest << "precision " << detail::precision_bits<Real>() << '\n';
  manifest << "vocab_hash " << hash_hex(vocab.hash()) << '\n';
  manifest << "vocab_size " << vocab.size() << '\n';
  for (const auto& [k, v] : hyper_entries(params.hyper())) manifest << "hp." << k << ' ' << v << '\n';
  for (const auto& e : params.entries()) {
    manifest << "param " << e.name << ' ' << e.value.rows() << ' ' << e.value.cols() << '\n';
  }
  {
    std::ofstream out(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
    out << manifest.str();
    if (!out) throw IoError("failed writing " + (dir / "manifest.txt").string());
  }
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    for (const auto& e : params.entries()) {
      for (Real v : e.value.data()) detail::write_le(out, v);
    }
    if (!out) throw IoError("failed writing " + (dir / "params.bin").string());
  }
  vocab.save(dir / "vocab.txt");
}

struct CheckpointInfo {
  int format_version = 0;
  int precision = 0;
  std::uint64_t vocab_hash = 0;
  std::size_t vocab_size = 0;
  HyperParams hyper;
  struct ParamShape {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
  };
  std::vector<ParamShape> params;
};

inline CheckpointInfo read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.txt";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint manifest " + path.string());
  CheckpointInfo info;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::istringstream fields(line);
    std::string key, value;
    fields >> key >> value;
    auto fail = [&](const std::string& why) {
      return ParseError(path.string() + " line " + std::to_string(line_no) + ": " + why);
    };
    if (key.empty()) continue;
    try {
      if (key == "format_version") info.format_version = static_cast<int>(parse_unsigned(value, key));
      else if (key == "precision") info.precision = static_cast<int>(parse_unsigned(value, key));
      else if (key == "vocab_hash") info.vocab_hash = parse_unsigned(value, key, 16);
      else if (key == "vocab_size") info.vocab_size = parse_unsigned(value, key);
      else if (key.starts_with("hp.")) {
        if (!set_hyper(info.hyper, key.substr(3), value)) throw fail("unknown key " + key);
      } else if (key == "param") {
        CheckpointInfo::ParamShape p;
        p.name = value;
        if (!(fields >> p.rows >> p.cols)) throw fail("param line needs name, rows and cols");
        info.params.push_back(p);
      } else {
        throw fail("unknown key " + key);
      }
    } catch (const ConfigError& e) {
      throw fail(e.what());
    }
  }
  if (info.format_version != kCheckpointFormat) {
    throw CompatibilityError("checkpoint format " + std::to_string(info.format_version) +
                             " is not supported (expected " + std::to_string(kCheckpointFormat) + ")");
  }
  if (info.precision != 32 && info.precision != 64) {
    throw ParseError(path.string() + ": precision must be 32 or 64");
  }
  return info;
}

template <typename Real>
struct Checkpoint {
  ModelParams<Real> params;
  Vocabulary vocab;
  CheckpointInfo info;
};

namespace detail {

template <typename Stored, typename Real>
void read_values(std::istream& in, Tensor<Real>& t) {
  for (Real& v : t.data()) v = static_cast<Real>(read_le<Stored>(in));
}

}  // namespace detail

// Loads into `Real`, converting when the stored precision differs.
template <typename Real>
Checkpoint<Real> load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint<Real> ck;
  ck.info = read_manifest(dir);
  ck.vocab = Vocabulary::load(dir / "vocab.txt");
  if (ck.vocab.hash() != ck.info.vocab_hash || ck.vocab.size() != ck.info.vocab_size) {
    throw CompatibilityError("checkpoint " + dir.string() +
                             ": vocab.txt does not match the manifest's vocabulary hash");
  }
  ck.params = ModelParams<Real>::initialize(ck.info.hyper, ck.info.vocab_size, 0);
  auto& entries = ck.params.entries();
  if (entries.size() != ck.info.params.size()) {
    throw CompatibilityError("checkpoint " + dir.string() + " lists " +
                             std::to_string(ck.info.params.size()) + " tensors, the architecture has " +
                             std::to_string(entries.size()));
  }
  const auto bin = dir / "params.bin";
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError("cannot read " + bin.string());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& want = ck.info.params[i];
    auto& e = entries[i];
    if (e.name != want.name || e.value.rows() != want.rows || e.value.cols() != want.cols) {
      throw CompatibilityError("checkpoint tensor " + want.name + " [" + std::to_string(want.rows) +
                               "x" + std::to_string(want.cols) + "] does not match " + e.name + " " +
                               shape_string(e.value.shape()));
    }
    if (ck.info.precision == 32) detail::read_values<float>(in, e.value);
    else detail::read_values<double>(in, e.value);
    if (!in) throw IoError(bin.string() + " is truncated at tensor " + e.name);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(bin.string() + " has trailing bytes");
  }
  return ck;
}

// Raises CompatibilityError unless `vocab` is the one the model was built on.
inline void require_vocabulary(std::uint64_t expected_hash, const Vocabulary& vocab) {
  if (vocab.hash() != expected_hash) {
    throw CompatibilityError("vocabulary hash " + hash_hex(vocab.hash()) +
                             " differs from the checkpoint's " + hash_hex(expected_hash));
  }
}

}  // namespace hmtl
