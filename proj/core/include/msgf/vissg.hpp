#pragma once

// Visual scene graphs over ingested detector regions: ROI features for boxes
// and their pairwise union boxes, gated GRU message passing over the complete
// directed graph, top-n anchor selection and per-anchor readout.

#include <span>
#include <string>
#include <vector>

#include "msgf/autograd.hpp"
#include "msgf/error.hpp"
#include "msgf/params.hpp"
#include "msgf/sgio.hpp"

namespace msgf {

// Raised by init_graph for a region set with no boxes.
class EmptyGraphError : public ContractError {
 public:
  using ContractError::ContractError;
};

struct VisualParams {
  Var proj_w;  // [d x C*p*p] shared ROI projection
  Var proj_b;  // [d]
  GruParams gru_node;
  GruParams gru_edge;
  Var v1, v2;  // [2d] node-message gates
  Var w1, w2;  // [2d] edge-message gates
  std::size_t grid = 2;
};

VisualParams make_visual_params(ParamStore& store, Initializer& init, std::size_t channels,
                                std::size_t d, std::size_t grid = 2);

// Tightest box containing both.
BoundingBox union_box(const BoundingBox& a, const BoundingBox& b);

// p x p max pooling of the feature map inside `b`, flattened to [C*p*p].
// Throws ContractError when `b` leaves the map.
Var roi_features(const Var& feature_map, const BoundingBox& b, std::size_t p);
// roi_features followed by the learned projection to [d].
Var roi_pool(const Var& feature_map, const BoundingBox& b, const VisualParams& params);

struct VisualGraph {
  std::vector<BoundingBox> boxes;
  std::vector<double> scores;
  std::vector<Var> nodes;  // h_i
  std::vector<Var> edges;  // h_{i->j} for every ordered pair, see edge_index

  std::size_t size() const noexcept { return nodes.size(); }
  std::size_t edge_count() const noexcept { return edges.size(); }
  // Position of edge i->j (i != j) in `edges`: row-major over i, skipping j == i.
  std::size_t edge_index(std::size_t i, std::size_t j) const;
};

VisualGraph init_graph(const Var& feature_map, const std::vector<BoundingBox>& boxes,
                       const std::vector<double>& scores, const VisualParams& params);
VisualGraph init_graph(const RegionSet& regions, const VisualParams& params);

// One synchronous round: every message is computed from the pre-step states,
// then all nodes and edges are updated by their GRUs.
VisualGraph message_step(const VisualGraph& g, const VisualParams& params);
VisualGraph run_reasoning(VisualGraph g, std::size_t t_iters, const VisualParams& params);

// Indices of the top_n highest scores, descending; ties go to the lower index.
std::vector<std::size_t> select_subgraphs(std::span<const double> scores, std::size_t top_n);

struct SubGraphEmbedding {
  std::size_t anchor = 0;
  Var embedding;  // [d]
};

// Mean of the anchor state and every edge state incident to it.
SubGraphEmbedding readout(const VisualGraph& g, std::size_t anchor);

// Full visual branch: init, t_iters rounds, selection, readout. Empty
// region sets yield an empty list.
std::vector<SubGraphEmbedding> visual_subgraphs(const RegionSet& regions,
                                                const VisualParams& params, std::size_t t_iters,
                                                std::size_t top_n);

// JSON dump of the retained graph: boxes, scores, selected anchors and the
// directed union-box relations.
std::string visual_graph_to_json(const VisualGraph& g, std::span<const std::size_t> anchors);

}  // namespace msgf
