#pragma once

// Run configuration: a flat `key = value` text file (`#` starts a comment),
// then command-line `key=value` overrides, over built-in defaults. The
// resolved configuration prints back in the same format and re-parses to an
// equal value.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hmtl/checkpoint.hpp"
#include "hmtl/daic.hpp"
#include "hmtl/model.hpp"
#include "hmtl/task.hpp"

namespace hmtl {

struct RunConfig {
  HyperParams hyper;
  TaskSet tasks{TaskId::Depression, TaskId::Emotion, TaskId::DialogAct, TaskId::Topic};
  std::size_t patience = 10;
  double clip_norm = 5.0;
  std::size_t min_freq = 1;
  std::size_t max_turn_tokens = 200;
  bool participant_only = false;
  bool grid_only = false;
  int precision = 32;

  std::string corpus_daily;
  std::string corpus_daic;
  std::string daic_labels;
  DaicSplitFiles daic_files;
  std::string daic_id_column;
  std::string daic_binary_column;
  std::string daic_score_column;
  std::string output_dir = "runs";

  double gradcheck_dropout = 0.0;
  double gradcheck_eps = 1e-3;
  double gradcheck_tolerance = 1e-4;

  LoadOptions load_options() const {
    LoadOptions o;
    o.max_turn_tokens = max_turn_tokens;
    o.participant_only = participant_only;
    return o;
  }

  DaicColumns daic_columns() const {
    DaicColumns c;
    if (!daic_id_column.empty()) c.id.insert(c.id.begin(), daic_id_column);
    if (!daic_binary_column.empty()) c.binary.insert(c.binary.begin(), daic_binary_column);
    if (!daic_score_column.empty()) c.score.insert(c.score.begin(), daic_score_column);
    return c;
  }

  void validate() const {
    if (tasks.empty()) throw ConfigError("tasks: at least one task must be active");
    hyper.validate(grid_only);
    if (patience == 0) throw ConfigError("patience must be positive");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be nonnegative");
    if (min_freq == 0) throw ConfigError("min_freq must be positive");
    if (max_turn_tokens == 0) throw ConfigError("max_turn_tokens must be positive");
    if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
    if (!(gradcheck_dropout >= 0.0 && gradcheck_dropout < 1.0)) {
      throw ConfigError("gradcheck_dropout must lie in [0, 1)");
    }
    if (!(gradcheck_eps > 0.0)) throw ConfigError("gradcheck_eps must be positive");
    if (!(gradcheck_tolerance > 0.0)) throw ConfigError("gradcheck_tolerance must be positive");
  }

  // Raises ConfigError naming the first path key a command needs but lacks.
  void require(std::initializer_list<const char*> keys) const {
    for (const char* key : keys) {
      const std::string_view k = key;
      const std::string& v = k == "corpus_daily"  ? corpus_daily
                             : k == "corpus_daic" ? corpus_daic
                             : k == "daic_labels" ? daic_labels
                                                  : output_dir;
      if (v.empty()) throw ConfigError(std::string(key) + ": required path is not set");
    }
  }

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.hyper == b.hyper && a.tasks == b.tasks && a.patience == b.patience &&
           a.clip_norm == b.clip_norm && a.min_freq == b.min_freq &&
           a.max_turn_tokens == b.max_turn_tokens && a.participant_only == b.participant_only &&
           a.grid_only == b.grid_only && a.precision == b.precision &&
           a.corpus_daily == b.corpus_daily && a.corpus_daic == b.corpus_daic &&
           a.daic_labels == b.daic_labels && a.daic_files.train == b.daic_files.train &&
           a.daic_files.dev == b.daic_files.dev && a.daic_files.test == b.daic_files.test &&
           a.daic_id_column == b.daic_id_column && a.daic_binary_column == b.daic_binary_column &&
           a.daic_score_column == b.daic_score_column && a.output_dir == b.output_dir &&
           a.gradcheck_dropout == b.gradcheck_dropout && a.gradcheck_eps == b.gradcheck_eps &&
           a.gradcheck_tolerance == b.gradcheck_tolerance;
  }
};

inline TaskSet parse_tasks(std::string_view text) {
  TaskSet out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    std::string item(text.substr(start, end - start));
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) throw ConfigError("tasks: empty task name in '" + std::string(text) + "'");
    try {
      out.insert(parse_task(item));
    } catch (const Error&) {
      throw ConfigError("tasks: unknown task '" + item + "'");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_bool(std::string_view text, std::string_view key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

namespace detail {

struct ConfigKey {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<std::pair<std::string, ConfigKey>>& config_keys() {
  using R = RunConfig;
  auto size = [](std::size_t R::*field, const char* key) {
    return ConfigKey{[=](R& c, std::string_view v) { c.*field = parse_unsigned(v, key); },
                     [=](const R& c) { return std::to_string(c.*field); }};
  };
  auto real = [](double R::*field, const char* key) {
    return ConfigKey{[=](R& c, std::string_view v) { c.*field = parse_double(v, key); },
                     [=](const R& c) { return format_double(c.*field); }};
  };
  auto flag = [](bool R::*field, const char* key) {
    return ConfigKey{[=](R& c, std::string_view v) { c.*field = parse_bool(v, key); },
                     [=](const R& c) { return std::string(c.*field ? "true" : "false"); }};
  };
  auto text = [](std::string R::*field) {
    return ConfigKey{[=](R& c, std::string_view v) { c.*field = std::string(v); },
                     [=](const R& c) { return c.*field; }};
  };
  auto label_file = [](std::string DaicSplitFiles::*field) {
    return ConfigKey{[=](R& c, std::string_view v) { c.daic_files.*field = std::string(v); },
                     [=](const R& c) { return c.daic_files.*field; }};
  };

  static const std::vector<std::pair<std::string, ConfigKey>> keys = [&] {
    std::vector<std::pair<std::string, ConfigKey>> k;
    for (const auto& [name, _] : hyper_entries(HyperParams{})) {
      k.push_back({name, ConfigKey{[name = name](R& c, std::string_view v) { set_hyper(c.hyper, name, v); },
                                   [name = name](const R& c) {
                                     for (const auto& [n, v] : hyper_entries(c.hyper)) {
                                       if (n == name) return v;
                                     }
                                     return std::string();
                                   }}});
    }
    k.push_back({"tasks", ConfigKey{[](R& c, std::string_view v) { c.tasks = parse_tasks(v); },
                                    [](const R& c) { return to_string(c.tasks); }}});
    k.push_back({"patience", size(&R::patience, "patience")});
    k.push_back({"clip_norm", real(&R::clip_norm, "clip_norm")});
    k.push_back({"min_freq", size(&R::min_freq, "min_freq")});
    k.push_back({"max_turn_tokens", size(&R::max_turn_tokens, "max_turn_tokens")});
    k.push_back({"participant_only", flag(&R::participant_only, "participant_only")});
    k.push_back({"grid_only", flag(&R::grid_only, "grid_only")});
    k.push_back({"precision", ConfigKey{[](R& c, std::string_view v) {
                                          c.precision = static_cast<int>(parse_unsigned(v, "precision"));
                                          if (c.precision != 32 && c.precision != 64) {
                                            throw ConfigError("precision: expected 32 or 64");
                                          }
                                        },
                                        [](const R& c) { return std::to_string(c.precision); }}});
    k.push_back({"corpus_daily", text(&R::corpus_daily)});
    k.push_back({"corpus_daic", text(&R::corpus_daic)});
    k.push_back({"daic_labels", text(&R::daic_labels)});
    k.push_back({"daic_train_labels", label_file(&DaicSplitFiles::train)});
    k.push_back({"daic_dev_labels", label_file(&DaicSplitFiles::dev)});
    k.push_back({"daic_test_labels", label_file(&DaicSplitFiles::test)});
    k.push_back({"daic_id_column", text(&R::daic_id_column)});
    k.push_back({"daic_binary_column", text(&R::daic_binary_column)});
    k.push_back({"daic_score_column", text(&R::daic_score_column)});
    k.push_back({"output_dir", text(&R::output_dir)});
    k.push_back({"gradcheck_dropout", real(&R::gradcheck_dropout, "gradcheck_dropout")});
    k.push_back({"gradcheck_eps", real(&R::gradcheck_eps, "gradcheck_eps")});
    k.push_back({"gradcheck_tolerance", real(&R::gradcheck_tolerance, "gradcheck_tolerance")});
    return k;
  }();
  return keys;
}

inline std::string trim_config(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline std::vector<std::string> config_key_names() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::config_keys()) out.push_back(k);
  return out;
}

inline void set_config(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& [k, entry] : detail::config_keys()) {
    if (k == key) {
      try {
        entry.set(cfg, value);
      } catch (const ConfigError& e) {
        const std::string msg = e.what();
        throw ConfigError(msg.starts_with(std::string(key)) ? msg : std::string(key) + ": " + msg);
      }
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

// Splits "key=value" (or "key = value").
inline std::pair<std::string, std::string> split_assignment(std::string_view text,
                                                            std::string_view where) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(std::string(where) + ": expected key = value, got '" + std::string(text) + "'");
  }
  auto key = detail::trim_config(text.substr(0, eq));
  if (key.empty()) throw ConfigError(std::string(where) + ": missing key");
  return {key, detail::trim_config(text.substr(eq + 1))};
}

inline void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim_config(line).empty()) continue;
    const auto [key, value] =
        split_assignment(line, std::string(source) + ":" + std::to_string(line_no));
    set_config(cfg, key, value);
  }
}

// Defaults for the corpus paths under $HMTL_DATA_ROOT, when set.
inline RunConfig default_config() {
  RunConfig cfg;
  if (const char* root = std::getenv("HMTL_DATA_ROOT"); root && *root) {
    const std::filesystem::path r(root);
    cfg.corpus_daily = (r / "dailydialog").string();
    cfg.corpus_daic = (r / "daic" / "transcripts").string();
    cfg.daic_labels = (r / "daic" / "labels").string();
  }
  return cfg;
}

inline RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides, RunConfig base = default_config()) {
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw IoError("cannot read config " + file->string());
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(base, text.str(), file->string());
  }
  for (const auto& o : overrides) {
    const auto [key, value] = split_assignment(o, "--set");
    set_config(base, key, value);
  }
  base.validate();
  return base;
}

inline std::string config_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& [k, entry] : detail::config_keys()) out << k << " = " << entry.get(cfg) << '\n';
  return out.str();
}

}  // namespace hmtl
