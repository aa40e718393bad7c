#pragma once

// DailyDialog split reader. A split directory holds four line-parallel files:
//   dialogues_<split>.txt          turns separated by "__eou__"
//   dialogues_emotion_<split>.txt  one label 0-6 per turn
//   dialogues_act_<split>.txt      one label 1-4 per turn
//   dialogues_topic_<split>.txt    one label 1-10 per dialog

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "hmtl/corpus.hpp"
#include "hmtl/log.hpp"

namespace hmtl {

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() &&
         lines.back().find_first_not_of(" \t") == std::string::npos) {
    lines.pop_back();
  }
  return lines;
}

inline std::vector<long> parse_ints(std::string_view line, const std::filesystem::path& file,
                                    std::size_t line_no) {
  std::vector<long> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !is_space(static_cast<unsigned char>(line[j]))) ++j;
    long value = 0;
    auto [ptr, ec] = std::from_chars(line.data() + i, line.data() + j, value);
    if (ec != std::errc() || ptr != line.data() + j) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": bad integer '" +
                       std::string(line.substr(i, j - i)) + "'");
    }
    out.push_back(value);
    i = j;
  }
  return out;
}

inline std::size_t checked_label(long value, long lo, long hi, const std::filesystem::path& file,
                                 std::size_t line_no) {
  if (value < lo || value > hi) {
    throw LabelError(file.string() + ":" + std::to_string(line_no) + ": label " +
                     std::to_string(value) + " outside [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  }
  return static_cast<std::size_t>(value - lo);
}

inline std::vector<std::string> split_utterances(std::string_view line) {
  static constexpr std::string_view kEou = "__eou__";
  std::vector<std::string> turns;
  std::size_t start = 0;
  for (std::size_t pos = line.find(kEou); pos != std::string_view::npos;
       pos = line.find(kEou, start)) {
    turns.emplace_back(line.substr(start, pos - start));
    start = pos + kEou.size();
  }
  return turns;
}

}  // namespace detail

inline std::filesystem::path dailydialog_split_dir(const std::filesystem::path& root, Split split) {
  return root / std::string(split_name(split));
}

// Loads one split; the split name is the directory's final component.
inline std::vector<Dialog> load_dailydialog(const std::filesystem::path& split_dir,
                                            const LoadOptions& options = {}) {
  const std::string split = split_dir.filename().string();
  auto file = [&](std::string_view stem) {
    return split_dir / ("dialogues_" + std::string(stem) + split + ".txt");
  };
  const auto text_path = file(""), emo_path = file("emotion_"), act_path = file("act_"),
             topic_path = file("topic_");
  const auto text = detail::read_lines(text_path);
  const auto emotions = detail::read_lines(emo_path);
  const auto acts = detail::read_lines(act_path);
  const auto topics = detail::read_lines(topic_path);

  auto check_count = [&](const std::vector<std::string>& lines, const std::filesystem::path& p) {
    if (lines.size() != text.size()) {
      throw AlignmentError(p.string() + " has " + std::to_string(lines.size()) +
                           " lines but " + text_path.string() + " has " +
                           std::to_string(text.size()));
    }
  };
  check_count(emotions, emo_path);
  check_count(acts, act_path);
  check_count(topics, topic_path);

  std::vector<Dialog> dialogs;
  dialogs.reserve(text.size());
  std::size_t dropped_turns = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto utterances = detail::split_utterances(text[i]);
    const auto emo = detail::parse_ints(emotions[i], emo_path, line_no);
    const auto act = detail::parse_ints(acts[i], act_path, line_no);
    const auto top = detail::parse_ints(topics[i], topic_path, line_no);
    if (emo.size() != utterances.size() || act.size() != utterances.size()) {
      throw AlignmentError("line " + std::to_string(line_no) + ": " +
                           std::to_string(utterances.size()) + " turns, " +
                           std::to_string(emo.size()) + " emotion labels, " +
                           std::to_string(act.size()) + " act labels");
    }
    if (top.size() != 1) {
      throw AlignmentError("line " + std::to_string(line_no) + ": expected one topic label, got " +
                           std::to_string(top.size()));
    }

    Dialog dialog;
    dialog.id = split + "-" + std::to_string(line_no);
    dialog.corpus = Corpus::DailyDialog;
    dialog.topic = detail::checked_label(top[0], 1, 10, topic_path, line_no);
    for (std::size_t t = 0; t < utterances.size(); ++t) {
      Turn turn;
      turn.speaker = t % 2 == 0 ? Speaker::A : Speaker::B;
      turn.emotion = detail::checked_label(emo[t], 0, 6, emo_path, line_no);
      turn.act = detail::checked_label(act[t], 1, 4, act_path, line_no);
      turn.tokens = tokenize(utterances[t]);
      truncate_tokens(turn.tokens, options.max_turn_tokens);
      if (turn.tokens.empty() && !options.keep_empty_turns) {
        ++dropped_turns;
        continue;
      }
      dialog.turns.push_back(std::move(turn));
    }
    if (dialog.turns.empty()) {
      log::warn("dailydialog " + dialog.id + ": no non-empty turns, dialog skipped");
      continue;
    }
    dialogs.push_back(std::move(dialog));
  }
  if (dropped_turns > 0) {
    log::warn("dailydialog " + split + ": dropped " + std::to_string(dropped_turns) +
              " empty turns");
  }
  return dialogs;
}

}  // namespace hmtl
