// Elementwise, linear-algebra, shape and reduction primitives.

#include <algorithm>
#include <cmath>

#include "msgf/autograd.hpp"
#include "msgf/error.hpp"

namespace msgf {

namespace {

using detail::emit;

std::span<const Var> span_of(std::initializer_list<Var> l) { return {l.begin(), l.size()}; }

// For each flat index of `a`, the flat index into `b` under trailing/any-axis
// singleton broadcasting. Empty when the shapes are identical.
std::vector<std::size_t> broadcast_map(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return {};
  if (a.size() != b.size())
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " +
                     shape_str(a));
  for (std::size_t i = 0; i < a.size(); ++i)
    if (b[i] != a[i] && b[i] != 1)
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " +
                       shape_str(a));
  const std::size_t rank = a.size();
  std::vector<std::size_t> b_stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = rank; i-- > 0;) {
    b_stride[i] = b[i] == 1 ? 0 : s;
    s *= b[i];
  }
  std::vector<std::size_t> map(numel(a));
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < map.size(); ++flat) {
    std::size_t bi = 0;
    for (std::size_t d = 0; d < rank; ++d) bi += idx[d] * b_stride[d];
    map[flat] = bi;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < a[d]) break;
      idx[d] = 0;
    }
  }
  return map;
}

inline std::size_t bidx(const std::vector<std::size_t>& map, std::size_t i) {
  return map.empty() ? i : map[i];
}

template <class Fwd, class Back>
Var unary(std::string_view name, const Var& x, Fwd fwd, Back back) {
  const auto& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = fwd(xv[i]);
  return emit(name, std::move(out), span_of({x}), [&] {
    return BackwardFn([x, back](const Tensor& out, const Tensor& g, std::span<Tensor* const> gin) {
      const auto& xv = x.value();
      auto& gx = *gin[0];
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * back(xv[i], out[i]);
    });
  });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  auto map = broadcast_map(a.shape(), b.shape(), "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[bidx(map, i)];
  return emit("add", std::move(out), span_of({a, b}), [&] {
    return BackwardFn([map](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      if (gin[0])
        for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i];
      if (gin[1])
        for (std::size_t i = 0; i < g.numel(); ++i) (*gin[1])[bidx(map, i)] += g[i];
    });
  });
}

Var sub(const Var& a, const Var& b) {
  auto map = broadcast_map(a.shape(), b.shape(), "sub");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[bidx(map, i)];
  return emit("sub", std::move(out), span_of({a, b}), [&] {
    return BackwardFn([map](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      if (gin[0])
        for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i];
      if (gin[1])
        for (std::size_t i = 0; i < g.numel(); ++i) (*gin[1])[bidx(map, i)] -= g[i];
    });
  });
}

Var hadamard(const Var& a, const Var& b) {
  auto map = broadcast_map(a.shape(), b.shape(), "hadamard");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[bidx(map, i)];
  return emit("hadamard", std::move(out), span_of({a, b}), [&] {
    return BackwardFn([a, b, map](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      const auto& av = a.value();
      const auto& bv = b.value();
      if (gin[0])
        for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * bv[bidx(map, i)];
      if (gin[1])
        for (std::size_t i = 0; i < g.numel(); ++i) (*gin[1])[bidx(map, i)] += g[i] * av[i];
    });
  });
}

Var maximum(const Var& a, const Var& b) {
  if (a.shape() != b.shape())
    throw ShapeError("maximum: shapes differ " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] >= bv[i] ? av[i] : bv[i];
  return emit("maximum", std::move(out), span_of({a, b}), [&] {
    return BackwardFn([a, b](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      const auto& av = a.value();
      const auto& bv = b.value();
      for (std::size_t i = 0; i < g.numel(); ++i) {
        const bool pick_a = av[i] >= bv[i];
        if (pick_a && gin[0]) (*gin[0])[i] += g[i];
        if (!pick_a && gin[1]) (*gin[1])[i] += g[i];
      }
    });
  });
}

Var scale(const Var& x, double s) {
  return unary("scale", x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& x, double s) {
  return unary("add_scalar", x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Var one_minus(const Var& x) {
  return unary("one_minus", x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Var square(const Var& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var abs(const Var& x) {
  return unary(
      "abs", x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Var sqrt_clamped(const Var& x) {
  return unary(
      "sqrt", x, [](double v) { return v > 0 ? std::sqrt(v) : 0.0; },
      [](double v, double y) { return v > 0 && y > 0 ? 0.5 / y : 0.0; });
}

Var activation(const Var& x, Activation kind, double slope) {
  switch (kind) {
    case Activation::sigmoid:
      return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
    case Activation::tanh:
      return unary(
          "tanh", x, [](double v) { return std::tanh(v); },
          [](double, double y) { return 1.0 - y * y; });
    case Activation::leaky_relu:
      return unary(
          "leaky_relu", x, [slope](double v) { return v > 0 ? v : slope * v; },
          [slope](double v, double) { return v > 0 ? 1.0 : slope; });
  }
  throw ContractError("unknown activation");
}

Var matmul(const Var& a, const Var& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0])
    throw ShapeError("matmul: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));
  const std::size_t m = as[0], k = as[1], n = bs[1];
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  return emit("matmul", std::move(out), span_of({a, b}), [&] {
    return BackwardFn([a, b, m, k, n](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      const auto& av = a.value();
      const auto& bv = b.value();
      if (gin[0]) {  // dA = dC * B^T
        auto& ga = *gin[0];
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (gin[1]) {  // dB = A^T * dC
        auto& gb = *gin[1];
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      }
    });
  });
}

Var matvec(const Var& w, const Var& x) {
  const auto& ws = w.shape();
  const auto& xs = x.shape();
  if (ws.size() != 2 || xs.size() != 1 || ws[1] != xs[0])
    throw ShapeError("matvec: incompatible shapes " + shape_str(ws) + " and " + shape_str(xs));
  const std::size_t m = ws[0], k = ws[1];
  const auto& wv = w.value();
  const auto& xv = x.value();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0;
    for (std::size_t p = 0; p < k; ++p) acc += wv[i * k + p] * xv[p];
    out[i] = acc;
  }
  return emit("matvec", std::move(out), span_of({w, x}), [&] {
    return BackwardFn([w, x, m, k](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      const auto& wv = w.value();
      const auto& xv = x.value();
      if (gin[0])
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) (*gin[0])[i * k + p] += g[i] * xv[p];
      if (gin[1])
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) (*gin[1])[p] += g[i] * wv[i * k + p];
    });
  });
}

Var dot(const Var& a, const Var& b) {
  if (a.shape() != b.shape())
    throw ShapeError("dot: shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const auto& av = a.value();
  const auto& bv = b.value();
  double acc = 0;
  for (std::size_t i = 0; i < av.numel(); ++i) acc += av[i] * bv[i];
  return emit("dot", Tensor::scalar(acc), span_of({a, b}), [&] {
    return BackwardFn([a, b](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      const auto& av = a.value();
      const auto& bv = b.value();
      if (gin[0])
        for (std::size_t i = 0; i < av.numel(); ++i) (*gin[0])[i] += g[0] * bv[i];
      if (gin[1])
        for (std::size_t i = 0; i < av.numel(); ++i) (*gin[1])[i] += g[0] * av[i];
    });
  });
}

Var transpose(const Var& x) {
  const auto& s = x.shape();
  if (s.size() != 2) throw ShapeError("transpose expects rank 2, got " + shape_str(s));
  const std::size_t r = s[0], c = s[1];
  const auto& xv = x.value();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  return emit("transpose", std::move(out), span_of({x}), [&] {
    return BackwardFn([r, c](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gin[0])[i * c + j] += g[j * r + i];
    });
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return emit("reshape", std::move(out), span_of({x}), [&] {
    return BackwardFn([](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i];
    });
  });
}

Var softmax_rows(const Var& x) {
  const auto& s = x.shape();
  if (s.size() > 2) throw ShapeError("softmax_rows expects rank 1 or 2, got " + shape_str(s));
  const std::size_t rows = s.size() == 1 ? 1 : s[0];
  const std::size_t cols = s.back();
  const auto& xv = x.value();
  Tensor out(s);
  std::vector<double> sorted(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data().data() + r * cols;
    double* o = out.data().data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    for (std::size_t c = 0; c < cols; ++c) o[c] = std::exp(in[c] - mx);
    // Order-independent normalizer: permuting a row permutes its output exactly.
    std::copy(o, o + cols, sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    double z = 0;
    for (double e : sorted) z += e;
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
  return emit("softmax_rows", std::move(out), span_of({x}), [&] {
    return BackwardFn([rows, cols](const Tensor& y, const Tensor& g, std::span<Tensor* const> gin) {
      auto& gx = *gin[0];
      for (std::size_t r = 0; r < rows; ++r) {
        double dotgy = 0;
        for (std::size_t c = 0; c < cols; ++c) dotgy += g[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          gx[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dotgy);
      }
    });
  });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of an empty list");
  const Shape& first = parts[0].shape();
  if (axis >= first.size())
    throw ShapeError("concat axis " + std::to_string(axis) + " out of range for " +
                     shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != first.size())
      throw ShapeError("concat rank mismatch: " + shape_str(first) + " vs " + shape_str(s));
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != first[d])
        throw ShapeError("concat non-axis dims differ: " + shape_str(first) + " vs " +
                         shape_str(s));
    lens.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t total = out_shape[axis];
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].value();
    const std::size_t block = lens[k] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.data().begin() + o * block, block,
                  out.data().begin() + (o * total + offset) * inner);
    offset += lens[k];
  }
  return emit("concat", std::move(out), parts, [&] {
    return BackwardFn([lens, outer, inner, total](const Tensor&, const Tensor& g,
                                                  std::span<Tensor* const> gin) {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < lens.size(); ++k) {
        const std::size_t block = lens[k] * inner;
        if (gin[k])
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < block; ++i)
              (*gin[k])[o * block + i] += g[(o * total + offset) * inner + i];
        offset += lens[k];
      }
    });
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto& s = x.shape();
  if (axis >= s.size() || begin >= end || end > s[axis])
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t len = end - begin, full = s[axis];
  Shape os = s;
  os[axis] = len;
  const auto& xv = x.value();
  Tensor out(os);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.data().begin() + (o * full + begin) * inner, len * inner,
                out.data().begin() + o * len * inner);
  return emit("slice", std::move(out), span_of({x}), [&] {
    return BackwardFn([outer, inner, len, full, begin](const Tensor&, const Tensor& g,
                                                       std::span<Tensor* const> gin) {
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < len * inner; ++i)
          (*gin[0])[(o * full + begin) * inner + i] += g[o * len * inner + i];
    });
  });
}

Var row(const Var& x, std::size_t i) {
  if (x.shape().size() != 2) throw ShapeError("row() expects rank 2, got " + shape_str(x.shape()));
  return reshape(slice(x, 0, i, i + 1), {x.shape()[1]});
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack_rows of an empty list");
  std::vector<Var> as_rows;
  as_rows.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.shape().size() != 1)
      throw ShapeError("stack_rows expects rank-1 parts, got " + shape_str(r.shape()));
    as_rows.push_back(reshape(r, {1, r.shape()[0]}));
  }
  return concat(std::span<const Var>(as_rows), 0);
}

Var reduce(const Var& x, ReduceKind kind, int axis) {
  const auto& s = x.shape();
  std::size_t outer = 1, len = x.numel(), inner = 1;
  Shape os{1};
  if (axis >= 0) {
    const auto ax = static_cast<std::size_t>(axis);
    if (ax >= s.size())
      throw ShapeError("reduce axis " + std::to_string(axis) + " out of range for " +
                       shape_str(s));
    outer = 1;
    inner = 1;
    for (std::size_t d = 0; d < ax; ++d) outer *= s[d];
    for (std::size_t d = ax + 1; d < s.size(); ++d) inner *= s[d];
    len = s[ax];
    os.clear();
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != ax) os.push_back(s[d]);
    if (os.empty()) os.push_back(1);
  }
  if (len == 0) throw EmptyReductionError("reduction over an empty axis");
  const auto& xv = x.value();
  Tensor out(os);
  std::vector<std::size_t> argmax;
  if (kind == ReduceKind::max) argmax.resize(outer * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      double acc = kind == ReduceKind::max ? xv[base] : 0.0;
      std::size_t best = 0;
      for (std::size_t l = 0; l < len; ++l) {
        const double v = xv[base + l * inner];
        if (kind == ReduceKind::max) {
          if (v > acc) {
            acc = v;
            best = l;
          }
        } else {
          acc += v;
        }
      }
      if (kind == ReduceKind::mean) acc /= static_cast<double>(len);
      if (kind == ReduceKind::max) argmax[o * inner + i] = best;
      out[o * inner + i] = acc;
    }
  return emit("reduce", std::move(out), span_of({x}), [&] {
    return BackwardFn([kind, outer, len, inner, argmax](const Tensor&, const Tensor& g,
                                                        std::span<Tensor* const> gin) {
      auto& gx = *gin[0];
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t base = o * len * inner + i;
          const double go = g[o * inner + i];
          switch (kind) {
            case ReduceKind::sum:
              for (std::size_t l = 0; l < len; ++l) gx[base + l * inner] += go;
              break;
            case ReduceKind::mean:
              for (std::size_t l = 0; l < len; ++l)
                gx[base + l * inner] += go / static_cast<double>(len);
              break;
            case ReduceKind::max:
              gx[base + argmax[o * inner + i] * inner] += go;
              break;
          }
        }
    });
  });
}

Var add_n(std::span<const Var> parts) {
  if (parts.empty()) throw EmptyReductionError("add_n of an empty list");
  const Shape& s = parts[0].shape();
  for (const auto& p : parts)
    if (p.shape() != s)
      throw ShapeError("add_n shapes differ: " + shape_str(s) + " vs " + shape_str(p.shape()));
  // Terms are summed in ascending order per coordinate, so the result does
  // not depend on the order of `parts`.
  Tensor out(s);
  std::vector<double> terms(parts.size());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    for (std::size_t k = 0; k < parts.size(); ++k) terms[k] = parts[k].value()[i];
    std::sort(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += t;
    out[i] = acc;
  }
  return emit("add_n", std::move(out), parts, [&] {
    return BackwardFn([](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      for (auto* gi : gin)
        if (gi)
          for (std::size_t i = 0; i < g.numel(); ++i) (*gi)[i] += g[i];
    });
  });
}

Var mean_of(std::span<const Var> parts) {
  if (parts.empty()) throw EmptyReductionError("mean of an empty list");
  return scale(add_n(parts), 1.0 / static_cast<double>(parts.size()));
}

Var embedding_lookup(const Var& table, std::size_t index) {
  const auto& s = table.shape();
  if (s.size() != 2) throw ShapeError("embedding table must be rank 2, got " + shape_str(s));
  if (index >= s[0])
    throw ContractError("embedding index " + std::to_string(index) + " out of range " +
                        std::to_string(s[0]));
  const std::size_t d = s[1];
  Tensor out({d});
  std::copy_n(table.value().data().begin() + index * d, d, out.data().begin());
  return emit("embedding", std::move(out), span_of({table}), [&] {
    return BackwardFn([index, d](const Tensor&, const Tensor& g, std::span<Tensor* const> gin) {
      for (std::size_t i = 0; i < d; ++i) (*gin[0])[index * d + i] += g[i];
    });
  });
}

Var gru_cell(const Var& input, const Var& h_prev, const GruParams& p) {
  const auto& ws = p.w_z.shape();
  if (ws.size() != 2 || input.shape().size() != 1 || h_prev.shape().size() != 1 ||
      ws[1] != input.shape()[0] || ws[0] != h_prev.shape()[0])
    throw ShapeError("gru_cell: W " + shape_str(ws) + ", input " + shape_str(input.shape()) +
                     ", state " + shape_str(h_prev.shape()));
  Var z = sigmoid(add(add(matvec(p.w_z, input), matvec(p.u_z, h_prev)), p.b_z));
  Var r = sigmoid(add(add(matvec(p.w_r, input), matvec(p.u_r, h_prev)), p.b_r));
  Var cand = tanh(add(add(matvec(p.w_h, input), matvec(p.u_h, hadamard(r, h_prev))), p.b_h));
  return add(hadamard(one_minus(z), h_prev), hadamard(z, cand));
}

}  // namespace msgf
