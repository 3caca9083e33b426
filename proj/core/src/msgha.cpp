#include "msgf/msgha.hpp"

#include <cmath>

#include "msgf/error.hpp"

namespace msgf {

Tier tier_of(std::size_t k) {
  if (k < kObjectTokens) return Tier::obj;
  if (k == 3) return Tier::reg;
  if (k == 4) return Tier::glob;
  throw ContractError("token index " + std::to_string(k) + " out of range");
}

MlpParams make_mlp_params(ParamStore& store, Initializer& init, const std::string& prefix,
                          std::size_t in, std::size_t hidden, std::size_t out) {
  MlpParams p;
  p.w1 = store.add(prefix + ".w1", init.lecun({hidden, in}, in));
  p.b1 = store.add(prefix + ".b1", Tensor({hidden}));
  p.w2 = store.add(prefix + ".w2", init.lecun({out, hidden}, hidden));
  p.b2 = store.add(prefix + ".b2", Tensor({out}));
  return p;
}

Var mlp_forward(const MlpParams& p, const Var& x) {
  return add(matvec(p.w2, tanh(add(matvec(p.w1, x), p.b1))), p.b2);
}

HierParams make_hier_params(ParamStore& store, Initializer& init, std::size_t d,
                            std::size_t heads) {
  if (heads == 0 || d % heads != 0)
    throw ConfigError("embedding width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  HierParams p;
  p.heads = heads;
  p.visual_null = store.add("hier.visual_null", init.normal({d}, 0.1));
  p.reg_query = store.add("hier.reg_query", init.lecun({d}, d));
  const char* names[3] = {"hier.mlp_obj", "hier.mlp_reg", "hier.mlp_glob"};
  for (std::size_t t = 0; t < 3; ++t)
    p.tier_mlp[t] = make_mlp_params(store, init, names[t], 2 * d, 2 * d, d);
  p.cls = store.add("hier.cls", init.normal({d}, 1.0));
  p.w_q = store.add("hier.w_q", init.lecun({d, d}, d));
  p.w_k = store.add("hier.w_k", init.lecun({d, d}, d));
  p.w_v = store.add("hier.w_v", init.lecun({d, d}, d));
  p.w_o = store.add("hier.w_o", init.lecun({d, d}, d));
  return p;
}

namespace {

// sum_k weights[k] * rows[k], summed order-independently.
Var weighted_sum(std::span<const Var> rows, const Var& weights) {
  std::vector<Var> terms;
  terms.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k)
    terms.push_back(hadamard(rows[k], slice(weights, 0, k, k + 1)));
  return add_n(terms);
}

}  // namespace

VisualTokens reconstruct_visual(std::span<const Var> subgraphs, const HierParams& p) {
  VisualTokens out;
  const Var& null = p.visual_null;
  if (subgraphs.empty()) {
    std::vector<Var> rows(kTokenCount, null);
    out.tokens = stack_rows(rows);
    out.empty = true;
    return out;
  }
  const double d = static_cast<double>(null.numel());
  std::vector<Var> scores;
  for (const auto& s : subgraphs) scores.push_back(scale(dot(s, p.reg_query), 1.0 / std::sqrt(d)));
  out.region_weights = softmax_rows(concat(scores, 0));

  std::vector<Var> rows;
  for (std::size_t k = 0; k < kObjectTokens; ++k)
    rows.push_back(k < subgraphs.size() ? subgraphs[k] : null);
  rows.push_back(weighted_sum(subgraphs, out.region_weights));
  rows.push_back(mean_of(subgraphs));
  out.tokens = stack_rows(rows);
  return out;
}

Var tier_fuse(const Var& v, const Var& t, const HierParams& p) {
  if (v.shape() != t.shape() || v.shape().size() != 2 || v.shape()[0] != kTokenCount)
    throw ShapeError("tier_fuse expects two [5 x d] sequences, got " + shape_str(v.shape()) +
                     " and " + shape_str(t.shape()));
  std::vector<Var> rows;
  for (std::size_t k = 0; k < kTokenCount; ++k) {
    const auto& mlp = p.tier_mlp[static_cast<std::size_t>(tier_of(k))];
    rows.push_back(mlp_forward(mlp, concat({row(v, k), row(t, k)}, 0)));
  }
  return stack_rows(rows);
}

ClsOutput cls_attend(const Var& f, const HierParams& p) {
  const auto& s = f.shape();
  const std::size_t d = p.cls.numel();
  if (s.size() != 2 || s[1] != d) throw ShapeError("cls_attend: tokens " + shape_str(s));
  if (d % p.heads != 0) throw ConfigError("embedding width not divisible by head count");
  const std::size_t dh = d / p.heads;
  const std::size_t n = s[0];

  const Var q = row(matmul(reshape(p.cls, {1, d}), p.w_q), 0);
  const Var k = matmul(f, p.w_k);
  const Var v = matmul(f, p.w_v);

  ClsOutput out;
  std::vector<Var> heads;
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Var qh = slice(q, 0, h * dh, (h + 1) * dh);
    const Var kh = slice(k, 1, h * dh, (h + 1) * dh);
    const Var vh = slice(v, 1, h * dh, (h + 1) * dh);
    std::vector<Var> scores, values;
    for (std::size_t j = 0; j < n; ++j) {
      scores.push_back(scale(dot(qh, row(kh, j)), 1.0 / std::sqrt(static_cast<double>(dh))));
      values.push_back(row(vh, j));
    }
    Var w = softmax_rows(concat(scores, 0));
    heads.push_back(weighted_sum(values, w));
    out.weights.push_back(std::move(w));
  }
  out.embedding = row(matmul(reshape(concat(heads, 0), {1, d}), p.w_o), 0);
  return out;
}

}  // namespace msgf
