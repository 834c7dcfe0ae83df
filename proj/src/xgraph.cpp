// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/xgraph.hpp>

namespace synctva {

const char *graph_pair_name(GraphPair p) {
  switch (p) {
  case GraphPair::VA:
    return "va";
  case GraphPair::TV:
    return "tv";
  case GraphPair::AT:
    return "at";
  }
  return "?";
}

GraphVariant parse_graph_variant(std::string_view tag) {
  if (tag == "full")
    return GraphVariant::Full;
  if (tag == "VA_only" || tag == "va_only")
    return GraphVariant::VaOnly;
  if (tag == "VA_TV" || tag == "va_tv")
    return GraphVariant::VaTv;
  if (tag == "none")
    return GraphVariant::None;
  throw ConfigError("unknown graph variant '" + std::string(tag) + "'");
}

const char *graph_variant_name(GraphVariant v) {
  switch (v) {
  case GraphVariant::Full:
    return "full";
  case GraphVariant::VaOnly:
    return "VA_only";
  case GraphVariant::VaTv:
    return "VA_TV";
  case GraphVariant::None:
    return "none";
  }
  return "?";
}

bool graph_enabled(GraphVariant variant, GraphPair pair) {
  switch (variant) {
  case GraphVariant::Full:
    return true;
  case GraphVariant::VaOnly:
    return pair == GraphPair::VA;
  case GraphVariant::VaTv:
    return pair != GraphPair::AT;
  case GraphVariant::None:
    return false;
  }
  return false;
}

EdgeScorerParams EdgeScorerParams::init(std::size_t d, Rng &rng) {
  return {glorot({d, d}, d, d, rng), zeros_param({1})};
}

Tensor score_edges(const Tensor &f1, const Tensor &f2, const EdgeScorerParams &params) {
  if (f1.dim() != 2 || f2.dim() != 2 || f1.rows() != f2.rows() || f1.cols() != f2.cols())
    throw DimensionError("score_edges: features " + shape_str(f1.shape()) + " and " +
                         shape_str(f2.shape()) + " must both be N×d");
  if (params.weight.rows() != f1.cols() || params.weight.cols() != f2.cols())
    throw DimensionError("score_edges: bilinear form " + shape_str(params.weight.shape()) +
                         " does not match feature width " + std::to_string(f1.cols()));
  return add(matmul(matmul(f1, params.weight), transpose(f2)), params.bias);
}

Tensor build_adjacency(const Tensor &scores) { return bipartite_embed(sigmoid(scores)); }

Tensor gcn_layer(const Tensor &adjacency, const Tensor &h, const Tensor &weight) {
  if (adjacency.rows() != h.rows())
    throw DimensionError("gcn_layer: adjacency " + shape_str(adjacency.shape()) +
                         " does not match node features " + shape_str(h.shape()));
  return relu(matmul(normalized_propagator(adjacency), matmul(h, weight)));
}

XGraphParams XGraphParams::init(std::size_t d, std::size_t gcn_layers, GraphVariant variant,
                                bool share_gcn_weights, std::array<bool, 3> build, Rng &rng) {
  XGraphParams p;
  p.variant = variant;
  p.share_gcn_weights = share_gcn_weights;
  bool shared_done = false;
  for (GraphPair pair : kGraphPairs) {
    const auto i = static_cast<std::size_t>(pair);
    if (!build[i] || !graph_enabled(variant, pair))
      continue;
    p.scorers[i] = EdgeScorerParams::init(d, rng);
    if (share_gcn_weights && shared_done)
      continue;
    auto &layers = p.gcn[share_gcn_weights ? 0 : i];
    for (std::size_t l = 0; l < gcn_layers; ++l)
      layers.push_back(glorot({d, d}, d, d, rng));
    shared_done = true;
  }
  return p;
}

const std::vector<Tensor> &XGraphParams::gcn_weights(GraphPair pair) const {
  return gcn[share_gcn_weights ? 0 : static_cast<std::size_t>(pair)];
}

void XGraphParams::collect(ParamList &out, const std::string &prefix) const {
  for (GraphPair pair : kGraphPairs) {
    const auto i = static_cast<std::size_t>(pair);
    const std::string base = prefix + graph_pair_name(pair) + ".";
    if (scorers[i]) {
      collect_param(out, base, "score_w", scorers[i]->weight);
      collect_param(out, base, "score_b", scorers[i]->bias);
    }
    const std::string gbase = share_gcn_weights ? prefix + "shared." : base;
    for (std::size_t l = 0; l < gcn[i].size(); ++l)
      collect_param(out, gbase, ("gcn" + std::to_string(l)).c_str(), gcn[i][l]);
  }
}

GraphOutputs build_graphs(const Tensor &text, const Tensor &audio, const Tensor &visual,
                          const XGraphParams &params, std::array<bool, 3> wanted) {
  if (text.shape() != audio.shape() || text.shape() != visual.shape())
    throw DimensionError("build_graphs: modality features " + shape_str(text.shape()) + ", " +
                         shape_str(audio.shape()) + ", " + shape_str(visual.shape()) +
                         " must share N×d");
  GraphOutputs out;
  for (GraphPair pair : kGraphPairs) {
    const auto i = static_cast<std::size_t>(pair);
    if (!wanted[i])
      continue;
    const Tensor &first = pair == GraphPair::VA ? visual : (pair == GraphPair::TV ? text : audio);
    const Tensor &second =
      pair == GraphPair::VA ? audio : (pair == GraphPair::TV ? visual : text);
    Tensor stacked = concat(first, second, 0);
    if (!graph_enabled(params.variant, pair)) {
      out.features[i] = stacked;
      continue;
    }
    if (!params.scorers[i])
      throw ConfigError(std::string("graph ") + graph_pair_name(pair) + " has no parameters");
    CrossModalGraph g;
    g.pair = pair;
    g.nodes = stacked;
    g.adjacency = build_adjacency(score_edges(first, second, *params.scorers[i]));
    Tensor h = stacked;
    for (const Tensor &w : params.gcn_weights(pair))
      h = gcn_layer(g.adjacency, h, w);
    g.output = h;
    out.features[i] = h;
    out.graphs[i] = std::move(g);
  }
  return out;
}

} // namespace synctva
