#include "msgf/vissg.hpp"

#include <algorithm>
#include <numeric>
#include <nlohmann/json.hpp>

namespace msgf {

VisualParams make_visual_params(ParamStore& store, Initializer& init, std::size_t channels,
                                std::size_t d, std::size_t grid) {
  if (grid == 0) throw ConfigError("roi grid must be at least 1");
  VisualParams p;
  const std::size_t in = channels * grid * grid;
  p.grid = grid;
  p.proj_w = store.add("visual.proj_w", init.lecun({d, in}, in));
  p.proj_b = store.add("visual.proj_b", Tensor({d}));
  p.gru_node = make_gru_params(store, init, "visual.gru_node", d, d);
  p.gru_edge = make_gru_params(store, init, "visual.gru_edge", d, d);
  p.v1 = store.add("visual.v1", init.lecun({2 * d}, 2 * d));
  p.v2 = store.add("visual.v2", init.lecun({2 * d}, 2 * d));
  p.w1 = store.add("visual.w1", init.lecun({2 * d}, 2 * d));
  p.w2 = store.add("visual.w2", init.lecun({2 * d}, 2 * d));
  return p;
}

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

Var roi_features(const Var& feature_map, const BoundingBox& b, std::size_t p) {
  const auto& s = feature_map.shape();
  if (s.size() != 3) throw ShapeError("feature map must be [C x H x W], got " + shape_str(s));
  if (!b.valid() || b.x1 > static_cast<std::int64_t>(s[2]) ||
      b.y1 > static_cast<std::int64_t>(s[1]))
    throw ContractError("box [" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
                        std::to_string(b.x1) + "," + std::to_string(b.y1) +
                        "] is outside the " + shape_str(s) + " feature map");
  PoolBox pb{static_cast<std::size_t>(b.x0), static_cast<std::size_t>(b.y0),
             static_cast<std::size_t>(b.x1), static_cast<std::size_t>(b.y1)};
  return roi_max_pool(feature_map, pb, p);
}

Var roi_pool(const Var& feature_map, const BoundingBox& b, const VisualParams& params) {
  return add(matvec(params.proj_w, roi_features(feature_map, b, params.grid)), params.proj_b);
}

std::size_t VisualGraph::edge_index(std::size_t i, std::size_t j) const {
  const std::size_t n = nodes.size();
  if (i >= n || j >= n || i == j) throw ContractError("no edge between these nodes");
  return i * (n - 1) + (j < i ? j : j - 1);
}

VisualGraph init_graph(const Var& feature_map, const std::vector<BoundingBox>& boxes,
                       const std::vector<double>& scores, const VisualParams& params) {
  if (boxes.empty()) throw EmptyGraphError("visual graph needs at least one region");
  if (scores.size() != boxes.size())
    throw ContractError("region scores and boxes differ in length");
  VisualGraph g;
  g.boxes = boxes;
  g.scores = scores;
  for (const auto& b : boxes) g.nodes.push_back(roi_pool(feature_map, b, params));
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = 0; j < boxes.size(); ++j)
      if (i != j) g.edges.push_back(roi_pool(feature_map, union_box(boxes[i], boxes[j]), params));
  return g;
}

VisualGraph init_graph(const RegionSet& regions, const VisualParams& params) {
  return init_graph(Var::constant(regions.feature_map), regions.boxes, regions.scores, params);
}

namespace {

Var gated(const Var& gate, const Var& a, const Var& b, const Var& value) {
  return hadamard(value, sigmoid(dot(gate, concat({a, b}, 0))));
}

}  // namespace

VisualGraph message_step(const VisualGraph& g, const VisualParams& params) {
  const std::size_t n = g.size();
  VisualGraph next;
  next.boxes = g.boxes;
  next.scores = g.scores;
  next.nodes.reserve(n);
  next.edges.reserve(g.edges.size());

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Var> terms;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Var& out_e = g.edges[g.edge_index(i, j)];
      const Var& in_e = g.edges[g.edge_index(j, i)];
      terms.push_back(gated(params.v1, g.nodes[i], out_e, out_e));
      terms.push_back(gated(params.v2, g.nodes[i], in_e, in_e));
    }
    Var m = terms.empty() ? Var::constant(Tensor(g.nodes[i].shape())) : add_n(terms);
    next.nodes.push_back(gru_cell(m, g.nodes[i], params.gru_node));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Var& e_ij = g.edges[g.edge_index(i, j)];
      const Var& e_ji = g.edges[g.edge_index(j, i)];
      Var m = add(gated(params.w1, g.nodes[i], e_ij, g.nodes[i]),
                  gated(params.w2, g.nodes[i], e_ji, g.nodes[j]));
      next.edges.push_back(gru_cell(m, e_ij, params.gru_edge));
    }
  return next;
}

VisualGraph run_reasoning(VisualGraph g, std::size_t t_iters, const VisualParams& params) {
  if (t_iters == 0) throw ContractError("run_reasoning needs at least one iteration");
  for (std::size_t t = 0; t < t_iters; ++t) g = message_step(g, params);
  return g;
}

std::vector<std::size_t> select_subgraphs(std::span<const double> scores, std::size_t top_n) {
  if (top_n == 0) throw ContractError("top_n must be at least 1");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (idx.size() > top_n) idx.resize(top_n);
  return idx;
}

SubGraphEmbedding readout(const VisualGraph& g, std::size_t anchor) {
  if (anchor >= g.size()) throw ContractError("readout anchor out of range");
  std::vector<Var> states{g.nodes[anchor]};
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (j == anchor) continue;
    states.push_back(g.edges[g.edge_index(anchor, j)]);
    states.push_back(g.edges[g.edge_index(j, anchor)]);
  }
  return {anchor, mean_of(states)};
}

std::vector<SubGraphEmbedding> visual_subgraphs(const RegionSet& regions,
                                                const VisualParams& params, std::size_t t_iters,
                                                std::size_t top_n) {
  if (regions.boxes.empty()) return {};
  VisualGraph g = run_reasoning(init_graph(regions, params), t_iters, params);
  std::vector<SubGraphEmbedding> out;
  for (auto k : select_subgraphs(g.scores, top_n)) out.push_back(readout(g, k));
  return out;
}

std::string visual_graph_to_json(const VisualGraph& g, std::span<const std::size_t> anchors) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& b = g.boxes[i];
    doc["nodes"].push_back({{"id", i}, {"box", {b.x0, b.y0, b.x1, b.y1}}, {"score", g.scores[i]}});
  }
  doc["relations"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (i == j) continue;
      const auto u = union_box(g.boxes[i], g.boxes[j]);
      doc["relations"].push_back({{"subject", i}, {"object", j}, {"union", {u.x0, u.y0, u.x1, u.y1}}});
    }
  doc["anchors"] = std::vector<std::size_t>(anchors.begin(), anchors.end());
  return doc.dump(2);
}

}  // namespace msgf
