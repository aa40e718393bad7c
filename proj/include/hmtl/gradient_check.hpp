#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hmtl/autodiff.hpp"

namespace hmtl {

// Builds a scalar on `tape` from the bound parameters. Must be deterministic
// (no dropout) so repeated evaluations differ only through the parameters.
using Objective =
    std::function<Var<double>(Tape<double>& tape, std::span<const Var<double>> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  std::size_t entries_checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace detail {

inline double evaluate_objective(const Objective& f, std::span<Tensor<double>* const> params) {
  Tape<double> tape;
  std::vector<Var<double>> bound;
  bound.reserve(params.size());
  for (auto* p : params) bound.push_back(tape.parameter(*p));
  const double value = f(tape, bound).value().item();
  if (!std::isfinite(value)) throw NumericError("gradient_check: objective is not finite");
  return value;
}

}  // namespace detail

// Compares reverse-mode gradients with central differences
// (f(x+eps) - f(x-eps)) / 2eps on every entry of every parameter.
// Parameters are perturbed in place and restored.
inline GradCheckResult gradient_check(const Objective& f, std::span<Tensor<double>* const> params,
                                      double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw ContractError("gradient_check: eps must be positive and finite");
  }

  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> bound;
    for (auto* p : params) bound.push_back(tape.parameter(*p));
    const Var<double> root = f(tape, bound);
    if (!std::isfinite(root.value().item())) {
      throw NumericError("gradient_check: objective is not finite");
    }
    const auto store = backward(root);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto* g = store.find(bound[k].id());
      analytic.push_back(g ? *g : Tensor<double>(params[k]->shape(), 0.0));
    }
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<double>& param = *params[k];
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + eps;
      const double plus = detail::evaluate_objective(f, params);
      param[i] = saved - eps;
      const double minus = detail::evaluate_objective(f, params);
      param[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = relative_error(analytic[k][i], numeric);
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = k;
        result.worst_entry = i;
      }
      ++result.entries_checked;
    }
  }
  return result;
}

}  // namespace hmtl
