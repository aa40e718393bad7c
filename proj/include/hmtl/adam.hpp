#pragma once

// Bias-corrected Adam over a list of parameter tensors, plus global-norm
// gradient clipping.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hmtl/error.hpp"
#include "hmtl/tensor.hpp"

namespace hmtl {

template <typename Real>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t t = 0;
  std::vector<Tensor<Real>> m;
  std::vector<Tensor<Real>> v;

  static AdamState for_shapes(std::span<const Tensor<Real>* const> params) {
    AdamState s;
    for (const auto* p : params) {
      s.m.emplace_back(p->shape(), Real(0));
      s.v.emplace_back(p->shape(), Real(0));
    }
    return s;
  }

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// `grads[i]` may be null: that parameter and its moments are left untouched.
// The step counter advances on every call. All gradients are checked before
// anything is written, so a rejected step leaves params and state intact.
template <typename Real>
void adam_step(std::span<Tensor<Real>* const> params, std::span<const Tensor<Real>* const> grads,
               AdamState<Real>& state, double lr, std::span<const std::string> names = {}) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ContractError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string label = i < names.size() ? names[i] : "parameter " + std::to_string(i);
    if (state.m[i].shape() != params[i]->shape() || state.v[i].shape() != params[i]->shape()) {
      throw ContractError("adam_step: optimizer state shape differs for " + label);
    }
    if (!grads[i]) continue;
    if (grads[i]->shape() != params[i]->shape()) {
      throw ContractError("adam_step: gradient shape " + shape_string(grads[i]->shape()) +
                          " differs from " + shape_string(params[i]->shape()) + " for " + label);
    }
    if (!grads[i]->all_finite()) throw NumericError("adam_step: non-finite gradient for " + label);
  }

  state.t += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i]) continue;
    auto p = params[i]->data();
    const auto g = grads[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
      m[k] = static_cast<Real>(mk);
      v[k] = static_cast<Real>(vk);
      const double step = lr * (mk / c1) / (std::sqrt(vk / c2) + state.epsilon);
      p[k] = static_cast<Real>(static_cast<double>(p[k]) - step);
    }
  }
}

template <typename Real>
double global_norm(std::span<const Tensor<Real>* const> grads) {
  double sq = 0.0;
  for (const auto* g : grads) {
    if (!g) continue;
    for (Real x : g->data()) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  return std::sqrt(sq);
}

// Rescales every gradient in place so the global L2 norm is at most
// `max_norm`; returns the norm before clipping. max_norm <= 0 disables it.
template <typename Real>
double clip_global_norm(std::span<Tensor<Real>* const> grads, double max_norm) {
  std::vector<const Tensor<Real>*> view(grads.begin(), grads.end());
  const double norm = global_norm<Real>(view);
  if (max_norm > 0.0 && norm > max_norm) {
    const Real scale = static_cast<Real>(max_norm / norm);
    for (auto* g : grads) {
      if (!g) continue;
      for (Real& x : g->data()) x *= scale;
    }
  }
  return norm;
}

}  // namespace hmtl
