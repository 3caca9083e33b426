#include "msgf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "msgf/error.hpp"

namespace msgf {

GradCheckResult check_gradients(const std::function<Var()>& loss_fn, std::span<Var> params,
                                const GradCheckOptions& opts) {
  for (auto& p : params) {
    if (!p.requires_grad() || !p.is_leaf())
      throw ContractError("check_gradients: parameters must be differentiable leaves");
    p.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Var loss = loss_fn();
    tape.backward(loss);
  }

  NoGradScope no_grad;
  std::mt19937_64 rng(opts.seed);
  GradCheckResult result;
  for (auto& p : params) {
    const Tensor analytic = p.has_grad() ? p.grad() : Tensor(p.shape(), 0.0);
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.max_coords && coords.size() > *opts.max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(*opts.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    auto& data = p.mutable_value();
    for (std::size_t i : coords) {
      const double saved = data[i];
      data[i] = saved + opts.step;
      const double up = loss_fn().item();
      data[i] = saved - opts.step;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double err =
          std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(analytic[i]));
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.coords_checked;
    }
  }
  return result;
}

double finite_difference_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                               double step) {
  Var leaf = Var::leaf(x);
  Var params[] = {leaf};
  GradCheckOptions opts;
  opts.step = step;
  return check_gradients([&] { return f(leaf); }, params, opts).max_rel_error;
}

}  // namespace msgf
