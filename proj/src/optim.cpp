#include "tssr/optim.hpp"

#include <cmath>

#include "tssr/error.hpp"

namespace tssr {

template <typename T>
AdamState<T> make_adam_state(const std::vector<NamedTensor<T>>& params) {
  AdamState<T> s;
  for (const auto& p : params) {
    s.m.push_back(Matrix<T>::Zero(p.value->rows(), p.value->cols()));
    s.v.push_back(Matrix<T>::Zero(p.value->rows(), p.value->cols()));
  }
  return s;
}

template <typename T>
void adam_step(const std::vector<NamedTensor<T>>& params, const std::vector<NamedTensor<T>>& grads,
               AdamState<T>& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ValidationError("optimizer state does not match the parameter set");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].value->rows() != params[i].value->rows() || grads[i].value->cols() != params[i].value->cols()) {
      throw ValidationError("gradient shape mismatch for " + params[i].name);
    }
    if (!grads[i].value->allFinite()) throw NumericError("non-finite gradient in " + params[i].name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(cfg.lr / c1);
  const T sqrt_c2 = static_cast<T>(std::sqrt(c2));
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = grads[i].value->array();
    state.m[i].array() = b1 * state.m[i].array() + (T(1) - b1) * g;
    state.v[i].array() = b2 * state.v[i].array() + (T(1) - b2) * g * g;
    params[i].value->array() -= step_size * state.m[i].array() / (state.v[i].array().sqrt() / sqrt_c2 + eps);
  }
}

template <typename T>
double global_norm(const std::vector<NamedTensor<T>>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.value->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(const std::vector<NamedTensor<T>>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto& g : grads) *g.value *= scale;
  }
  return norm;
}

template <typename T>
void zero_grads(const std::vector<NamedTensor<T>>& grads) {
  for (const auto& g : grads) g.value->setZero();
}

#define TSSR_INSTANTIATE(T)                                                                                       \
  template AdamState<T> make_adam_state(const std::vector<NamedTensor<T>>&);                                      \
  template void adam_step(const std::vector<NamedTensor<T>>&, const std::vector<NamedTensor<T>>&, AdamState<T>&, \
                          const AdamConfig&);                                                                     \
  template double global_norm(const std::vector<NamedTensor<T>>&);                                                \
  template double clip_grad_norm(const std::vector<NamedTensor<T>>&, double);                                     \
  template void zero_grads(const std::vector<NamedTensor<T>>&);

TSSR_INSTANTIATE(float)
TSSR_INSTANTIATE(double)
#undef TSSR_INSTANTIATE

}  // namespace tssr
