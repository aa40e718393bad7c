#pragma once

// Classification scores: accuracy plus macro-averaged precision, recall and
// F1. Macro values are unweighted means of the per-class values, and a
// per-class ratio with a zero denominator counts as 0.

#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "hmtl/error.hpp"
#include "hmtl/log.hpp"
#include "hmtl/task.hpp"

namespace hmtl {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), cells_(classes * classes, 0) {
    if (classes == 0) throw ContractError("confusion matrix needs at least one class");
  }

  void add(std::size_t gold, std::size_t pred) {
    if (gold >= classes_ || pred >= classes_) {
      throw ContractError("class index outside [0, " + std::to_string(classes_) + ")");
    }
    ++cells_[gold * classes_ + pred];
    ++total_;
  }

  std::size_t classes() const { return classes_; }
  std::size_t total() const { return total_; }
  std::size_t operator()(std::size_t gold, std::size_t pred) const {
    return cells_[gold * classes_ + pred];
  }

  std::size_t gold_count(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t p = 0; p < classes_; ++p) n += (*this)(c, p);
    return n;
  }
  std::size_t predicted_count(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t g = 0; g < classes_; ++g) n += (*this)(g, c);
    return n;
  }

 private:
  std::size_t classes_;
  std::size_t total_ = 0;
  std::vector<std::size_t> cells_;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  friend bool operator==(const ClassScores&, const ClassScores&) = default;
};

struct MetricsReport {
  std::string task;
  std::string split;
  std::size_t items = 0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassScores> per_class;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline MetricsReport report_from(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ContractError("metrics over zero items");
  MetricsReport r;
  r.items = cm.total();
  const std::size_t k = cm.classes();
  std::size_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t tp = cm(c, c);
    correct += tp;
    const std::size_t predicted = cm.predicted_count(c);
    const std::size_t gold = cm.gold_count(c);
    ClassScores s;
    s.support = gold;
    s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    r.macro_precision += s.precision;
    r.macro_recall += s.recall;
    r.macro_f1 += s.f1;
    r.per_class.push_back(s);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(cm.total());
  r.macro_precision /= static_cast<double>(k);
  r.macro_recall /= static_cast<double>(k);
  r.macro_f1 /= static_cast<double>(k);
  return r;
}

inline MetricsReport compute_metrics(const std::vector<std::size_t>& gold,
                                     const std::vector<std::size_t>& pred, std::size_t classes) {
  if (gold.size() != pred.size()) {
    throw ContractError("compute_metrics: " + std::to_string(gold.size()) + " gold vs " +
                        std::to_string(pred.size()) + " predicted labels");
  }
  if (gold.empty()) throw ContractError("compute_metrics: no items");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], pred[i]);
  return report_from(cm);
}

// Most frequent training class, ties to the lower index.
inline std::size_t majority_class(const std::vector<std::size_t>& training, std::size_t classes) {
  if (training.empty()) throw ContractError("majority_baseline: no training labels");
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t y : training) {
    if (y >= classes) throw ContractError("majority_baseline: label outside class range");
    ++counts[y];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  for (std::size_t c = best + 1; c < classes; ++c) {
    if (counts[c] == counts[best]) {
      log::info("majority_baseline: tie between classes " + std::to_string(best) + " and " +
                std::to_string(c) + ", using " + std::to_string(best));
      break;
    }
  }
  return best;
}

inline MetricsReport majority_baseline(const std::vector<std::size_t>& training,
                                       const std::vector<std::size_t>& eval_gold,
                                       std::size_t classes = 2) {
  if (eval_gold.empty()) throw ContractError("majority_baseline: no evaluation labels");
  const std::size_t c = majority_class(training, classes);
  return compute_metrics(eval_gold, std::vector<std::size_t>(eval_gold.size(), c), classes);
}

inline std::string format_number(double v, int precision = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

// Summary row followed by one row per class.
inline std::string report_csv(const MetricsReport& r, const std::vector<std::string>& class_labels) {
  std::ostringstream out;
  out << "task,split,scope,items,accuracy,precision,recall,f1,support\n";
  out << r.task << ',' << r.split << ",macro," << r.items << ',' << format_number(r.accuracy, 6)
      << ',' << format_number(r.macro_precision, 6) << ',' << format_number(r.macro_recall, 6) << ','
      << format_number(r.macro_f1, 6) << ',' << r.items << '\n';
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    const std::string name = c < class_labels.size() ? class_labels[c] : std::to_string(c);
    out << r.task << ',' << r.split << ",\"" << name << "\"," << s.support << ",,"
        << format_number(s.precision, 6) << ',' << format_number(s.recall, 6) << ','
        << format_number(s.f1, 6) << ',' << s.support << '\n';
  }
  return out.str();
}

inline std::string report_text(const MetricsReport& r, const std::vector<std::string>& class_labels) {
  std::ostringstream out;
  out << r.task << " on " << r.split << " (" << r.items << " items)\n";
  out << "  F1 " << format_number(100 * r.macro_f1, 1) << "  Prec. "
      << format_number(100 * r.macro_precision, 1) << "  Rec. "
      << format_number(100 * r.macro_recall, 1) << "  Acc. " << format_number(100 * r.accuracy, 1)
      << '\n';
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    out << "  " << std::left << std::setw(22)
        << (c < class_labels.size() ? class_labels[c] : std::to_string(c)) << std::right
        << " P " << format_number(100 * s.precision, 1) << "  R " << format_number(100 * s.recall, 1)
        << "  F1 " << format_number(100 * s.f1, 1) << "  n=" << s.support << '\n';
  }
  return out.str();
}

}  // namespace hmtl
