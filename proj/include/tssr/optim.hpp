#pragma once

#include <cstdint>
#include <vector>

#include "tssr/policy.hpp"

namespace tssr {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Matrix<T>> m;
  std::vector<Matrix<T>> v;
  std::uint64_t step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<NamedTensor<T>>& params);

// Bias-corrected Adam update. Throws NumericError on non-finite gradients
// before touching any parameter.
template <typename T>
void adam_step(const std::vector<NamedTensor<T>>& params, const std::vector<NamedTensor<T>>& grads,
               AdamState<T>& state, const AdamConfig& cfg);

template <typename T>
double global_norm(const std::vector<NamedTensor<T>>& grads);

// Rescales all gradients so that their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(const std::vector<NamedTensor<T>>& grads, double max_norm);

template <typename T>
void zero_grads(const std::vector<NamedTensor<T>>& grads);

}  // namespace tssr
