#pragma once

// Independent reference implementations used to cross-check the library.

#include <cmath>
#include <cstddef>
#include <vector>

namespace hmtl::testing {

struct TallyScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Direct per-class tp/fp/fn counting over the item list, no confusion matrix.
inline TallyScores brute_force_metrics(const std::vector<std::size_t>& gold,
                                       const std::vector<std::size_t>& pred, std::size_t classes) {
  TallyScores s;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += gold[i] == pred[i];
  s.accuracy = static_cast<double>(hits) / static_cast<double>(gold.size());
  for (std::size_t c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == c && gold[i] == c) tp += 1;
      if (pred[i] == c && gold[i] != c) fp += 1;
      if (pred[i] != c && gold[i] == c) fn += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    s.precision += p;
    s.recall += r;
    s.f1 += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  s.precision /= static_cast<double>(classes);
  s.recall /= static_cast<double>(classes);
  s.f1 /= static_cast<double>(classes);
  return s;
}

// Scalar Adam written out step by step in 64-bit.
inline std::vector<double> adam_trajectory(double start, const std::vector<double>& grads, double lr) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double x = start, m = 0, v = 0;
  std::vector<double> out;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vhat = v / (1 - std::pow(b2, static_cast<double>(t)));
    x -= lr * mhat / (std::sqrt(vhat) + eps);
    out.push_back(x);
  }
  return out;
}

}  // namespace hmtl::testing
