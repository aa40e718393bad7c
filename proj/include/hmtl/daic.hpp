#pragma once

// DAIC-style interview reader.
//
// Transcripts are tab-separated tables named <participant>_TRANSCRIPT.csv
// (anywhere below the transcripts directory) with header columns
// start_time, stop_time, speaker, value. The labels table is comma-separated
// with a participant-id column plus a binary label column and/or a PHQ score
// column. Ellie maps to speaker A, the participant to speaker B.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "hmtl/corpus.hpp"
#include "hmtl/log.hpp"

namespace hmtl {

struct DaicColumns {
  // First header match wins; the public splits disagree on naming.
  std::vector<std::string> id{"Participant_ID", "participant_id"};
  std::vector<std::string> binary{"PHQ8_Binary", "PHQ_Binary"};
  std::vector<std::string> score{"PHQ8_Score", "PHQ_Score"};
};

// Label table file names inside a labels directory, one per split.
struct DaicSplitFiles {
  std::string train = "train_split_Depression_AVEC2017.csv";
  std::string dev = "dev_split_Depression_AVEC2017.csv";
  std::string test = "full_test_split.csv";

  const std::string& operator[](Split split) const {
    return split == Split::Train ? train : split == Split::Dev ? dev : test;
  }
};

inline std::filesystem::path daic_labels_path(const std::filesystem::path& labels_dir, Split split,
                                              const DaicSplitFiles& files = {}) {
  return labels_dir / files[split];
}

struct DaicLabel {
  std::size_t depression = 0;
  std::optional<int> score;
};

namespace detail {

inline std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

inline std::optional<long> parse_long(std::string_view s) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> find_column(const std::vector<std::string>& header,
                                              const std::vector<std::string>& candidates) {
  for (const auto& name : candidates) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  }
  return std::nullopt;
}

}  // namespace detail

inline std::map<long, DaicLabel> load_daic_labels(const std::filesystem::path& path,
                                                  const DaicColumns& columns = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open labels table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty labels table");
  std::vector<std::string> header;
  for (auto& f : detail::split_fields(line, ',')) header.push_back(detail::trim(f));
  const auto id_col = detail::find_column(header, columns.id);
  const auto bin_col = detail::find_column(header, columns.binary);
  const auto score_col = detail::find_column(header, columns.score);
  if (!id_col) throw SchemaError(path.string() + ": no participant-id column");
  if (!bin_col && !score_col) {
    throw SchemaError(path.string() + ": needs a binary label column or a score column");
  }

  std::map<long, DaicLabel> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line, ',');
    auto cell = [&](std::optional<std::size_t> col) -> std::string {
      return col && *col < fields.size() ? detail::trim(fields[*col]) : std::string{};
    };
    const auto where = path.string() + " row " + std::to_string(row);
    const auto id = detail::parse_long(cell(id_col));
    if (!id) throw ParseError(where + ": bad participant id '" + cell(id_col) + "'");

    DaicLabel label;
    const std::string score_text = cell(score_col);
    if (!score_text.empty()) {
      const auto s = detail::parse_long(score_text);
      if (!s || *s < 0) throw ParseError(where + ": bad score '" + score_text + "'");
      label.score = static_cast<int>(*s);
    }
    const std::string bin_text = cell(bin_col);
    if (!bin_text.empty()) {
      const auto b = detail::parse_long(bin_text);
      if (!b || (*b != 0 && *b != 1)) throw ParseError(where + ": bad binary label '" + bin_text + "'");
      label.depression = static_cast<std::size_t>(*b);
      if (label.score && (*label.score >= kDepressionThreshold) != (*b == 1)) {
        throw SchemaError(where + ": binary label disagrees with score " +
                          std::to_string(*label.score));
      }
    } else if (label.score) {
      label.depression = *label.score >= kDepressionThreshold ? 1 : 0;
    } else {
      throw ParseError(where + ": neither binary label nor score present");
    }
    labels[*id] = label;
  }
  return labels;
}

// Reads one transcript into merged speech turns.
inline std::vector<Turn> read_daic_transcript(const std::filesystem::path& path,
                                              const LoadOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open transcript " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty transcript");
  std::vector<std::string> header;
  for (auto& f : detail::split_fields(line, '\t')) header.push_back(detail::trim(f));
  const auto start_col = detail::find_column(header, {"start_time"});
  const auto stop_col = detail::find_column(header, {"stop_time"});
  const auto speaker_col = detail::find_column(header, {"speaker"});
  const auto value_col = detail::find_column(header, {"value"});
  if (!start_col || !stop_col || !speaker_col || !value_col) {
    throw SchemaError(path.string() + ": header must contain start_time, stop_time, speaker, value");
  }
  const std::size_t needed =
      std::max({*start_col, *stop_col, *speaker_col, *value_col}) + 1;

  std::vector<Turn> turns;
  std::optional<Speaker> last;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line, '\t');
    const auto where = path.string() + " row " + std::to_string(row);
    if (fields.size() < needed) {
      throw ParseError(where + ": expected " + std::to_string(needed) + " fields, got " +
                       std::to_string(fields.size()));
    }
    for (auto col : {*start_col, *stop_col}) {
      const std::string f = detail::trim(fields[col]);
      double v = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(where + ": bad timestamp '" + f + "'");
      }
    }
    const std::string who = detail::trim(fields[*speaker_col]);
    Speaker speaker;
    if (who == "Ellie") {
      speaker = Speaker::A;
    } else if (who == "Participant") {
      speaker = Speaker::B;
    } else {
      throw SchemaError(where + ": unknown speaker '" + who + "'");
    }
    auto tokens = tokenize(fields[*value_col]);
    if (tokens.empty()) continue;
    if (last && *last == speaker) {
      auto& merged = turns.back().tokens;
      merged.insert(merged.end(), tokens.begin(), tokens.end());
    } else {
      Turn turn;
      turn.speaker = speaker;
      turn.tokens = std::move(tokens);
      turns.push_back(std::move(turn));
      last = speaker;
    }
  }
  for (auto& t : turns) truncate_tokens(t.tokens, options.max_turn_tokens);
  if (options.participant_only) {
    std::erase_if(turns, [](const Turn& t) { return t.speaker == Speaker::A; });
  }
  return turns;
}

// One Dialog per transcript whose participant appears in the labels table,
// ordered by participant id. Unlabeled transcripts are skipped.
inline std::vector<Dialog> load_daic(const std::filesystem::path& transcripts_dir,
                                     const std::filesystem::path& labels_path,
                                     const LoadOptions& options = {},
                                     const DaicColumns& columns = {}) {
  if (!std::filesystem::is_directory(transcripts_dir)) {
    throw IoError("transcripts directory not found: " + transcripts_dir.string());
  }
  const auto labels = load_daic_labels(labels_path, columns);

  static const std::regex kName(R"((\d+)_TRANSCRIPT\.csv)");
  std::map<long, std::filesystem::path> transcripts;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(transcripts_dir)) {
    if (!entry.is_regular_file()) continue;
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, kName)) transcripts[std::stol(m[1].str())] = entry.path();
  }

  std::vector<Dialog> dialogs;
  std::size_t unlabeled = 0;
  for (const auto& [id, path] : transcripts) {
    auto label = labels.find(id);
    if (label == labels.end()) {
      ++unlabeled;
      continue;
    }
    Dialog dialog;
    dialog.id = std::to_string(id);
    dialog.corpus = Corpus::Daic;
    dialog.turns = read_daic_transcript(path, options);
    dialog.depression = label->second.depression;
    dialog.phq_score = label->second.score;
    if (dialog.turns.empty()) {
      log::warn("daic session " + dialog.id + " has no usable turns, skipped");
      continue;
    }
    dialogs.push_back(std::move(dialog));
  }
  // Transcripts of every split usually share one directory, so sessions
  // missing from this split's table are expected.
  if (unlabeled > 0) {
    log::debug("daic: skipped " + std::to_string(unlabeled) + " sessions without a label in " +
              labels_path.filename().string());
  }
  std::size_t missing = 0;
  for (const auto& [id, _] : labels) missing += transcripts.count(id) ? 0 : 1;
  if (missing > 0) {
    log::warn("daic: " + std::to_string(missing) + " labeled participants have no transcript");
  }
  return dialogs;
}

}  // namespace hmtl
