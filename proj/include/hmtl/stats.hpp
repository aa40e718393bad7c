#pragma once

// Per-split class distributions of the two corpora.

#include <array>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "hmtl/daic.hpp"
#include "hmtl/dailydialog.hpp"
#include "hmtl/metrics.hpp"

namespace hmtl {

enum class StatsKind { Emotion, Act, Topic, Daic };

inline StatsKind parse_stats_kind(std::string_view s) {
  if (s == "emotion") return StatsKind::Emotion;
  if (s == "act" || s == "dialog_act") return StatsKind::Act;
  if (s == "topic") return StatsKind::Topic;
  if (s == "daic" || s == "depression") return StatsKind::Daic;
  throw ConfigError("kind: expected emotion, act, topic or daic, got '" + std::string(s) + "'");
}

inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Dev, Split::Test};

struct DistributionTable {
  std::string title;
  std::string unit;                 // what is counted
  std::vector<std::string> labels;  // one per class, in class order
  std::array<std::vector<std::size_t>, 3> counts;  // by split

  std::size_t total(std::size_t split) const {
    std::size_t n = 0;
    for (auto c : counts[split]) n += c;
    return n;
  }
  double percent(std::size_t split, std::size_t cls) const {
    const auto t = total(split);
    return t ? 100.0 * static_cast<double>(counts[split][cls]) / static_cast<double>(t) : 0.0;
  }
};

// Class labels with the numbering the corpus files use.
inline std::vector<std::string> numbered_labels(TaskId task, std::size_t first) {
  std::vector<std::string> out;
  const auto& names = class_names(task);
  for (std::size_t i = 0; i < names.size(); ++i) {
    out.push_back(std::to_string(first + i) + "-" + names[i]);
  }
  return out;
}

// Emotion and act count utterances (empty ones included); topic counts dialogs.
inline DistributionTable dailydialog_distribution(const std::filesystem::path& root, StatsKind kind) {
  if (kind == StatsKind::Daic) throw ContractError("dailydialog_distribution: DAIC kind");
  const TaskId task = kind == StatsKind::Emotion ? TaskId::Emotion
                      : kind == StatsKind::Act   ? TaskId::DialogAct
                                                 : TaskId::Topic;
  DistributionTable table;
  table.title = kind == StatsKind::Emotion ? "Emotion" : kind == StatsKind::Act ? "Dialog Act" : "Topic";
  table.unit = task_level(task) == TaskLevel::Turn ? "utterances" : "dialogs";
  table.labels = numbered_labels(task, task == TaskId::Emotion ? 0 : 1);
  LoadOptions options;
  options.keep_empty_turns = true;
  for (std::size_t s = 0; s < kAllSplits.size(); ++s) {
    auto& counts = table.counts[s];
    counts.assign(class_count(task), 0);
    for (const auto& d : load_dailydialog(dailydialog_split_dir(root, kAllSplits[s]), options)) {
      if (task == TaskId::Topic) {
        ++counts[*d.topic];
        continue;
      }
      for (const auto& t : d.turns) ++counts[task == TaskId::Emotion ? *t.emotion : *t.act];
    }
  }
  return table;
}

// Labeled sessions per split, from the label tables alone.
inline DistributionTable daic_distribution(const std::filesystem::path& labels_dir,
                                           const DaicSplitFiles& files = {},
                                           const DaicColumns& columns = {}) {
  DistributionTable table;
  table.title = "Depression";
  table.unit = "sessions";
  table.labels = class_names(TaskId::Depression);
  for (std::size_t s = 0; s < kAllSplits.size(); ++s) {
    table.counts[s].assign(2, 0);
    for (const auto& [id, label] :
         load_daic_labels(daic_labels_path(labels_dir, kAllSplits[s], files), columns)) {
      ++table.counts[s][label.depression];
    }
  }
  return table;
}

inline std::string distribution_csv(const DistributionTable& t) {
  std::ostringstream out;
  out << "class";
  for (Split s : kAllSplits) out << ',' << split_name(s) << "_count," << split_name(s) << "_percent";
  out << '\n';
  for (std::size_t c = 0; c <= t.labels.size(); ++c) {
    const bool total_row = c == t.labels.size();
    out << '"' << (total_row ? "total" : t.labels[c]) << '"';
    for (std::size_t s = 0; s < kAllSplits.size(); ++s) {
      out << ',' << (total_row ? t.total(s) : t.counts[s][c]) << ','
          << format_number(total_row ? (t.total(s) ? 100.0 : 0.0) : t.percent(s, c), 1);
    }
    out << '\n';
  }
  return out.str();
}

inline std::string distribution_text(const DistributionTable& t) {
  std::ostringstream out;
  out << t.title << " (" << t.unit << ")\n";
  out << std::left << std::setw(26) << "" << std::right;
  for (Split s : kAllSplits) out << std::setw(12) << split_name(s) << std::setw(8) << "%";
  out << '\n';
  for (std::size_t c = 0; c <= t.labels.size(); ++c) {
    const bool total_row = c == t.labels.size();
    out << std::left << std::setw(26) << (total_row ? "Total" : t.labels[c]) << std::right;
    for (std::size_t s = 0; s < kAllSplits.size(); ++s) {
      out << std::setw(12) << (total_row ? t.total(s) : t.counts[s][c]) << std::setw(8)
          << format_number(total_row ? (t.total(s) ? 100.0 : 0.0) : t.percent(s, c), 1);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace hmtl
