// Image-shaped primitives: convolution, replicated box filter, ROI max pool.

#include <algorithm>

#include "msgf/autograd.hpp"
#include "msgf/error.hpp"

namespace msgf {

namespace {
std::span<const Var> span_of(std::initializer_list<Var> l) { return {l.begin(), l.size()}; }

std::size_t clamp_index(long v, std::size_t n) {
  if (v < 0) return 0;
  if (static_cast<std::size_t>(v) >= n) return n - 1;
  return static_cast<std::size_t>(v);
}
}  // namespace

Var conv2d(const Var& x, const Var& k, std::size_t stride) {
  const auto& xs = x.shape();
  const auto& ks = k.shape();
  if (xs.size() != 3 || ks.size() != 4)
    throw ShapeError("conv2d expects x [C x H x W] and k [O x C x kh x kw], got " +
                     shape_str(xs) + " and " + shape_str(ks));
  if (ks[1] != xs[0])
    throw ShapeError("conv2d channel mismatch: input " + shape_str(xs) + ", kernel " +
                     shape_str(ks));
  if (ks[2] % 2 == 0 || ks[3] % 2 == 0)
    throw ShapeError("conv2d kernel must have odd spatial size, got " + shape_str(ks));
  if (stride == 0) throw ContractError("conv2d stride must be >= 1");

  const std::size_t C = xs[0], H = xs[1], W = xs[2];
  const std::size_t O = ks[0], KH = ks[2], KW = ks[3];
  const long ph = static_cast<long>(KH / 2), pw = static_cast<long>(KW / 2);
  const std::size_t OH = (H + stride - 1) / stride, OW = (W + stride - 1) / stride;
  const auto& xv = x.value();
  const auto& kv = k.value();
  Tensor out({O, OH, OW});

  // Visits every (output, input, kernel) triple that lands inside the image.
  auto for_taps = [=](auto&& fn) {
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ky = 0; ky < KH; ++ky)
          for (std::size_t kx = 0; kx < KW; ++kx) {
            const std::size_t ki = ((o * C + c) * KH + ky) * KW + kx;
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const long iy = static_cast<long>(oy * stride + ky) - ph;
              if (iy < 0 || iy >= static_cast<long>(H)) continue;
              const std::size_t xrow = (c * H + static_cast<std::size_t>(iy)) * W;
              const std::size_t orow = (o * OH + oy) * OW;
              for (std::size_t ox = 0; ox < OW; ++ox) {
                const long ix = static_cast<long>(ox * stride + kx) - pw;
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                fn(orow + ox, xrow + static_cast<std::size_t>(ix), ki);
              }
            }
          }
  };

  for_taps([&](std::size_t oi, std::size_t xi, std::size_t ki) { out[oi] += kv[ki] * xv[xi]; });

  return detail::emit("conv2d", std::move(out), span_of({x, k}), [&] {
    return BackwardFn([x, k, for_taps](const Tensor&, const Tensor& g,
                                       std::span<Tensor* const> gin) {
      const auto& xv = x.value();
      const auto& kv = k.value();
      Tensor* gx = gin[0];
      Tensor* gk = gin[1];
      for_taps([&](std::size_t oi, std::size_t xi, std::size_t ki) {
        if (gx) (*gx)[xi] += kv[ki] * g[oi];
        if (gk) (*gk)[ki] += xv[xi] * g[oi];
      });
    });
  });
}

Var box_mean(const Var& x, std::size_t window) {
  const auto& s = x.shape();
  if (s.size() != 2) throw ShapeError("box_mean expects [H x W], got " + shape_str(s));
  if (window % 2 == 0) throw ContractError("box_mean window must be odd");
  const std::size_t H = s[0], W = s[1];
  const long r = static_cast<long>(window / 2);
  const double inv = 1.0 / static_cast<double>(window * window);
  const auto& xv = x.value();
  Tensor out({H, W});

  auto for_taps = [=](auto&& fn) {
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (long di = -r; di <= r; ++di) {
          const std::size_t si = clamp_index(static_cast<long>(i) + di, H);
          for (long dj = -r; dj <= r; ++dj) {
            const std::size_t sj = clamp_index(static_cast<long>(j) + dj, W);
            fn(i * W + j, si * W + sj);
          }
        }
  };
  for_taps([&](std::size_t oi, std::size_t xi) { out[oi] += xv[xi]; });
  for (auto& v : out.data()) v *= inv;

  return detail::emit("box_mean", std::move(out), span_of({x}), [&] {
    return BackwardFn([for_taps, inv](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      auto& gx = *gin[0];
      for_taps([&](std::size_t oi, std::size_t xi) { gx[xi] += inv * g[oi]; });
    });
  });
}

Var roi_max_pool(const Var& feature_map, const PoolBox& box, std::size_t p) {
  const auto& s = feature_map.shape();
  if (s.size() != 3) throw ShapeError("roi_max_pool expects [C x H x W], got " + shape_str(s));
  if (p == 0) throw ContractError("roi_max_pool grid size must be >= 1");
  const std::size_t C = s[0], H = s[1], W = s[2];
  if (box.x0 >= box.x1 || box.y0 >= box.y1 || box.x1 > W || box.y1 > H)
    throw ContractError("roi box [" + std::to_string(box.x0) + "," + std::to_string(box.y0) +
                        "," + std::to_string(box.x1) + "," + std::to_string(box.y1) +
                        "] outside feature map " + shape_str(s));

  // Cell k of an extent of length n starting at a: near-equal split with the
  // last cell absorbing the remainder; when n < p cells collapse to single
  // pixels at floor(k * n / p).
  auto cell = [p](std::size_t a, std::size_t n, std::size_t k) -> std::pair<std::size_t, std::size_t> {
    if (n < p) {
      const std::size_t at = a + k * n / p;
      return {at, at + 1};
    }
    const std::size_t base = n / p;
    const std::size_t begin = a + k * base;
    const std::size_t end = (k + 1 == p) ? a + n : begin + base;
    return {begin, end};
  };

  const auto& fv = feature_map.value();
  Tensor out({C * p * p});
  std::vector<std::size_t> argmax(C * p * p);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t cy = 0; cy < p; ++cy) {
      const auto [y0, y1] = cell(box.y0, box.y1 - box.y0, cy);
      for (std::size_t cx = 0; cx < p; ++cx) {
        const auto [x0, x1] = cell(box.x0, box.x1 - box.x0, cx);
        std::size_t best = (c * H + y0) * W + x0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t xx = x0; xx < x1; ++xx) {
            const std::size_t idx = (c * H + y) * W + xx;
            if (fv[idx] > fv[best]) best = idx;
          }
        const std::size_t oi = (c * p + cy) * p + cx;
        out[oi] = fv[best];
        argmax[oi] = best;
      }
    }
  return detail::emit("roi_max_pool", std::move(out), span_of({feature_map}), [&] {
    return BackwardFn([argmax](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[argmax[i]] += g[i];
    });
  });
}

}  // namespace msgf
