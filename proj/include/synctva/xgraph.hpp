// SPDX-License-Identifier: Apache-2.0
/**
 * @file   xgraph.hpp
 * @brief  Cross-modal bipartite graphs and graph convolution.
 *
 * For a modality pair (P, Q) with N utterances the graph has 2N nodes,
 * H0 = [F_P; F_Q]. Edge scores E = F_P W_b F_Qᵀ + b are squashed with a
 * sigmoid and placed in the off-diagonal blocks of a symmetric 2N×2N
 * adjacency; within-modality blocks and the diagonal stay zero.
 */
#pragma once

#include <synctva/nn.hpp>

#include <array>
#include <optional>
#include <string_view>

namespace synctva {

enum class GraphPair { VA = 0, TV = 1, AT = 2 };
inline constexpr std::array<GraphPair, 3> kGraphPairs = {GraphPair::VA, GraphPair::TV,
                                                         GraphPair::AT};
const char *graph_pair_name(GraphPair p);

enum class GraphVariant { Full, VaOnly, VaTv, None };
GraphVariant parse_graph_variant(std::string_view tag);
const char *graph_variant_name(GraphVariant v);
/// Whether `variant` builds a real graph for `pair` (vs stacked pass-through).
bool graph_enabled(GraphVariant variant, GraphPair pair);

struct EdgeScorerParams {
  Tensor weight; // d×d
  Tensor bias;   // scalar

  static EdgeScorerParams init(std::size_t d, Rng &rng);
};

struct CrossModalGraph {
  GraphPair pair = GraphPair::VA;
  Tensor nodes;     // H0, 2N×d
  Tensor adjacency; // 2N×2N
  Tensor output;    // after the GCN stack
};

/// E[i][j] = F1[i] · W_b · F2[j]ᵀ + bias.
Tensor score_edges(const Tensor &f1, const Tensor &f2, const EdgeScorerParams &params);

/// A[i][N+j] = A[N+j][i] = sigmoid(E[i][j]); every other entry 0.
Tensor build_adjacency(const Tensor &scores);

/// ReLU(D̃^{-1/2} (A + I) D̃^{-1/2} H W).
Tensor gcn_layer(const Tensor &adjacency, const Tensor &h, const Tensor &weight);

struct XGraphParams {
  GraphVariant variant = GraphVariant::Full;
  bool share_gcn_weights = false;
  std::array<std::optional<EdgeScorerParams>, 3> scorers;
  /// gcn[pair][layer]; with sharing only gcn[0] is populated.
  std::array<std::vector<Tensor>, 3> gcn;

  /// `build[pair]` selects which graphs get parameters at all.
  static XGraphParams init(std::size_t d, std::size_t gcn_layers, GraphVariant variant,
                           bool share_gcn_weights, std::array<bool, 3> build, Rng &rng);

  const std::vector<Tensor> &gcn_weights(GraphPair pair) const;
  void collect(ParamList &out, const std::string &prefix) const;
};

struct GraphOutputs {
  /// Node features per pair (indexed by GraphPair): the GCN output when the
  /// graph is built, otherwise the stacked pair features. Undefined when the
  /// pair is not requested.
  std::array<Tensor, 3> features;
  std::array<std::optional<CrossModalGraph>, 3> graphs;
};

/// Modality order of each pair: VA = (visual, audio), TV = (text, visual),
/// AT = (audio, text).
GraphOutputs build_graphs(const Tensor &text, const Tensor &audio, const Tensor &visual,
                          const XGraphParams &params, std::array<bool, 3> wanted = {true, true,
                                                                                    true});

} // namespace synctva
