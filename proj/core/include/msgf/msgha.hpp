#pragma once

// Hierarchical aggregation of the two modalities: a 5-token visual sequence
// (3 object, 1 region, 1 global), tier-wise fusion with the text tokens and a
// multi-head CLS-query attention read-out.

#include <array>
#include <span>
#include <vector>

#include "msgf/autograd.hpp"
#include "msgf/params.hpp"

namespace msgf {

inline constexpr std::size_t kTokenCount = 5;
inline constexpr std::size_t kObjectTokens = 3;

enum class Tier { obj, reg, glob };
// Tier of token k in the fixed [obj, obj, obj, reg, glob] layout.
Tier tier_of(std::size_t k);

// Two-layer perceptron: linear, tanh, linear.
struct MlpParams {
  Var w1, b1;  // [hidden x in], [hidden]
  Var w2, b2;  // [out x hidden], [out]
};
MlpParams make_mlp_params(ParamStore& store, Initializer& init, const std::string& prefix,
                          std::size_t in, std::size_t hidden, std::size_t out);
Var mlp_forward(const MlpParams& p, const Var& x);

struct HierParams {
  Var visual_null;  // [d] pads missing object tokens
  Var reg_query;    // [d] region-level pooling query
  std::array<MlpParams, 3> tier_mlp;  // indexed by Tier
  Var cls;          // [d]
  Var w_q, w_k, w_v, w_o;  // [d x d], row-vector convention (x W)
  std::size_t heads = 2;
};

// Throws ConfigError unless heads divides d.
HierParams make_hier_params(ParamStore& store, Initializer& init, std::size_t d,
                            std::size_t heads = 2);

struct VisualTokens {
  Var tokens;          // [5 x d]
  Var region_weights;  // attention over the inputs; undefined when empty
  bool empty = false;  // no subgraphs: every token is the null token
};

// v_obj = first three inputs padded with the null token, v_reg = learned-
// query attention over all inputs (scaled by sqrt(d)), v_glob = their mean.
VisualTokens reconstruct_visual(std::span<const Var> subgraphs, const HierParams& p);

// f_k = MLP_tier(k)([v_k | t_k]) for each of the 5 tokens.
Var tier_fuse(const Var& v, const Var& t, const HierParams& p);

struct ClsOutput {
  Var embedding;             // [d]
  std::vector<Var> weights;  // per head, [5]
};
ClsOutput cls_attend(const Var& f, const HierParams& p);

}  // namespace msgf
