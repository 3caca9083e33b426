#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "msgf/autograd.hpp"

namespace msgf {

struct GradCheckOptions {
  double step = 1e-5;
  // Caps the number of probed coordinates per tensor; chosen with a seeded
  // RNG when the tensor is larger. nullopt probes every coordinate.
  std::optional<std::size_t> max_coords;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

// Compares reverse-mode gradients of the scalar `loss_fn()` w.r.t. each of
// `params` against central differences. Error per coordinate is
// |analytic - numeric| / max(1, |analytic|). `params` must be leaves with
// requires_grad; their grads are overwritten.
GradCheckResult check_gradients(const std::function<Var()>& loss_fn, std::span<Var> params,
                                const GradCheckOptions& opts = {});

// Single-input form: f maps a leaf x to a scalar.
double finite_difference_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                               double step = 1e-5);

}  // namespace msgf
