#pragma once

// Unified dialog representation shared by both corpora, the rule-based
// tokenizer, and the training vocabulary.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmtl/error.hpp"
#include "hmtl/task.hpp"

namespace hmtl {

enum class Speaker { A, B };
enum class Corpus { DailyDialog, Daic };

inline std::string_view corpus_name(Corpus c) {
  return c == Corpus::DailyDialog ? "dailydialog" : "daic";
}

// DailyDialog split directories use these names; DAIC splits reuse them.
enum class Split { Train, Dev, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "validation" || name == "dev") return Split::Dev;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

struct Turn {
  Speaker speaker = Speaker::A;
  std::vector<std::string> tokens;
  std::vector<std::size_t> token_ids;  // filled by encode_dialogs
  std::optional<std::size_t> emotion;  // [0, 7)
  std::optional<std::size_t> act;      // [0, 4), stored zero-based
};

struct Dialog {
  std::string id;
  Corpus corpus = Corpus::DailyDialog;
  std::vector<Turn> turns;
  std::optional<std::size_t> topic;       // [0, 10), stored zero-based
  std::optional<std::size_t> depression;  // 0 = negative, 1 = positive
  std::optional<int> phq_score;

  bool has_label(TaskId task) const {
    switch (task) {
      case TaskId::Depression: return depression.has_value();
      case TaskId::Topic: return topic.has_value();
      case TaskId::Emotion: return !turns.empty() && turns.front().emotion.has_value();
      case TaskId::DialogAct: return !turns.empty() && turns.front().act.has_value();
    }
    return false;
  }
};

inline constexpr int kDepressionThreshold = 10;

struct LoadOptions {
  std::size_t max_turn_tokens = 200;
  bool participant_only = false;  // DAIC only
  bool keep_empty_turns = false;  // DailyDialog only; such turns cannot be batched
};

namespace detail {

inline bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// Letters, digits, and any byte of a multi-byte UTF-8 sequence.
inline bool is_word_char(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace detail

// Lowercases ASCII, splits on whitespace, emits each punctuation character as
// its own token, and splits contractions before the apostrophe
// ("i'm" -> "i", "'m"). U+2019 is read as an ASCII apostrophe.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::string normalized;
  normalized.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      normalized.push_back('\'');
      i += 2;
      continue;
    }
    const auto c = static_cast<unsigned char>(text[i]);
    normalized.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : text[i]);
  }

  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto c = static_cast<unsigned char>(normalized[i]);
    if (detail::is_space(c)) {
      flush();
    } else if (detail::is_word_char(c)) {
      current.push_back(static_cast<char>(c));
    } else if (c == '\'' && !current.empty() && i + 1 < normalized.size() &&
               detail::is_word_char(static_cast<unsigned char>(normalized[i + 1]))) {
      flush();
      current.push_back('\'');
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

inline void truncate_tokens(std::vector<std::string>& tokens, std::size_t cap) {
  if (cap > 0 && tokens.size() > cap) tokens.resize(cap);
}

class TokenCounter {
 public:
  void add(const std::vector<Dialog>& dialogs) {
    for (const auto& d : dialogs) {
      for (const auto& t : d.turns) {
        for (const auto& tok : t.tokens) ++counts_[tok];
      }
    }
  }
  const std::unordered_map<std::string, std::size_t>& counts() const { return counts_; }
  bool empty() const { return counts_.empty(); }

 private:
  std::unordered_map<std::string, std::size_t> counts_;
};

// Token <-> id map. Ids 0 and 1 are reserved for padding and unknown; the
// remaining ids follow descending training frequency, ties lexicographic.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary() { from_list({}); }

  static Vocabulary build(const TokenCounter& counter, std::size_t min_freq = 1) {
    if (min_freq < 1) throw ContractError("min_freq must be >= 1");
    if (counter.empty()) throw ContractError("cannot build a vocabulary from an empty corpus");
    std::vector<std::pair<std::string, std::size_t>> entries;
    for (const auto& [tok, n] : counter.counts()) {
      if (n >= min_freq) entries.emplace_back(tok, n);
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> tokens;
    tokens.reserve(entries.size());
    for (auto& e : entries) tokens.push_back(std::move(e.first));
    Vocabulary v;
    v.from_list(std::move(tokens));
    return v;
  }

  // Tokens in id order, without the reserved entries.
  static Vocabulary from_tokens(std::vector<std::string> tokens) {
    Vocabulary v;
    v.from_list(std::move(tokens));
    return v;
  }

  std::size_t size() const { return id_to_token_.size(); }

  std::size_t id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  const std::string& token(std::size_t id) const { return id_to_token_.at(id); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }

  std::vector<std::string> decode(const std::vector<std::size_t>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (std::size_t i : ids) out.push_back(token(i));
    return out;
  }

  // FNV-1a over the serialized token list; identifies the id assignment.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& tok : id_to_token_) {
      for (unsigned char c : tok) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
      h ^= '\n';
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  // One token per line in id order, reserved entries included.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary " + path.string());
    for (const auto& tok : id_to_token_) out << tok << '\n';
    if (!out) throw IoError("failed writing vocabulary " + path.string());
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read vocabulary " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    if (lines.size() < 2 || lines[0] != kPadToken || lines[1] != kUnkToken) {
      throw ParseError("vocabulary " + path.string() + " lacks the reserved header entries");
    }
    return from_tokens(std::vector<std::string>(lines.begin() + 2, lines.end()));
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void from_list(std::vector<std::string> tokens) {
    id_to_token_.clear();
    token_to_id_.clear();
    id_to_token_.emplace_back(kPadToken);
    id_to_token_.emplace_back(kUnkToken);
    for (auto& t : tokens) {
      if (token_to_id_.count(t) || t == kPadToken || t == kUnkToken) {
        throw ContractError("duplicate vocabulary token '" + t + "'");
      }
      token_to_id_.emplace(t, id_to_token_.size());
      id_to_token_.push_back(std::move(t));
    }
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::size_t> token_to_id_;
};

inline Vocabulary build_vocabulary(const std::vector<Dialog>& training, std::size_t min_freq = 1) {
  TokenCounter counter;
  counter.add(training);
  return Vocabulary::build(counter, min_freq);
}

inline void encode_dialogs(std::vector<Dialog>& dialogs, const Vocabulary& vocab) {
  for (auto& d : dialogs) {
    for (auto& t : d.turns) t.token_ids = vocab.encode(t.tokens);
  }
}

}  // namespace hmtl
