#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "hmtl/error.hpp"

namespace hmtl {

enum class TaskId { Depression, Emotion, DialogAct, Topic };
enum class TaskLevel { Dialog, Turn };

inline constexpr std::array<TaskId, 4> kAllTasks = {TaskId::Depression, TaskId::Emotion,
                                                    TaskId::DialogAct, TaskId::Topic};

inline constexpr TaskLevel task_level(TaskId task) {
  return (task == TaskId::Emotion || task == TaskId::DialogAct) ? TaskLevel::Turn
                                                                : TaskLevel::Dialog;
}

inline constexpr std::size_t class_count(TaskId task) {
  switch (task) {
    case TaskId::Depression: return 2;
    case TaskId::Emotion: return 7;
    case TaskId::DialogAct: return 4;
    case TaskId::Topic: return 10;
  }
  return 0;
}

inline constexpr std::size_t task_index(TaskId task) { return static_cast<std::size_t>(task); }

inline std::string_view task_name(TaskId task) {
  switch (task) {
    case TaskId::Depression: return "depression";
    case TaskId::Emotion: return "emotion";
    case TaskId::DialogAct: return "dialog_act";
    case TaskId::Topic: return "topic";
  }
  return "?";
}

inline TaskId parse_task(std::string_view name) {
  for (TaskId t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  if (name == "act") return TaskId::DialogAct;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

// Class names in label-index order.
inline const std::vector<std::string>& class_names(TaskId task) {
  static const std::vector<std::string> depression{"non-depressed", "depressed"};
  static const std::vector<std::string> emotion{"no emotion", "anger",     "disgust", "fear",
                                                "happiness",  "sadness",   "surprise"};
  static const std::vector<std::string> act{"inform", "question", "directive", "commissive"};
  static const std::vector<std::string> topic{
      "ordinary life", "school life", "culture & education", "attitude & emotion",
      "relationship",  "tourism",     "health",              "work",
      "politics",      "finance"};
  switch (task) {
    case TaskId::Depression: return depression;
    case TaskId::Emotion: return emotion;
    case TaskId::DialogAct: return act;
    case TaskId::Topic: return topic;
  }
  return depression;
}

// Small fixed-size set of tasks.
class TaskSet {
 public:
  TaskSet() = default;
  TaskSet(std::initializer_list<TaskId> tasks) {
    for (TaskId t : tasks) insert(t);
  }

  void insert(TaskId t) { bits_ |= 1u << task_index(t); }
  void erase(TaskId t) { bits_ &= ~(1u << task_index(t)); }
  bool contains(TaskId t) const { return bits_ & (1u << task_index(t)); }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const { return static_cast<std::size_t>(__builtin_popcount(bits_)); }

  std::vector<TaskId> list() const {
    std::vector<TaskId> out;
    for (TaskId t : kAllTasks) {
      if (contains(t)) out.push_back(t);
    }
    return out;
  }

  TaskSet intersect(const TaskSet& other) const {
    TaskSet out;
    out.bits_ = bits_ & other.bits_;
    return out;
  }

  friend bool operator==(const TaskSet&, const TaskSet&) = default;

 private:
  unsigned bits_ = 0;
};

inline const TaskSet kAuxiliaryTasks{TaskId::Emotion, TaskId::DialogAct, TaskId::Topic};

inline std::string to_string(const TaskSet& tasks) {
  std::string out;
  for (TaskId t : tasks.list()) {
    if (!out.empty()) out += ',';
    out += task_name(t);
  }
  return out;
}

}  // namespace hmtl
