// SPDX-License-Identifier: Apache-2.0
/**
 * @file   fusion.hpp
 * @brief  Cross-graph interaction fusion.
 *
 * Each graph's node features pass through a same-length 1-D convolution
 * along the node sequence. The query graphs (VA, TV) are then layer
 * normalized; the AT graph's post-convolution, pre-normalization features
 * serve as keys and values for both branches:
 *
 *   branch b, round 1:  Q_b = H̃_VA or H̃_TV
 *   A_b = softmax(Q_b W_Q (H_AT W_K)ᵀ / sqrt(d)) H_AT W_V
 *   U_b = [Q_b, A_b]            (per node, 2d channels)
 *   Ũ_b = Conv(U_b)             (2d -> d channels)
 *   F_b = sigmoid(Ũ_b W_f + b_f) ⊙ tanh(Ũ_b W_g + b_g)
 *
 * Round r + 1 takes F_b from round r as its query. Every round owns its
 * own parameters. The readout averages rows i and N+i of each branch and
 * concatenates the two branches per utterance.
 */
#pragma once

#include <synctva/nn.hpp>

#include <array>
#include <string_view>
#include <vector>

namespace synctva {

enum class FusionVariant { Full, NoCaf, NoGating, SingleRound };
FusionVariant parse_fusion_variant(std::string_view tag);
const char *fusion_variant_name(FusionVariant v);
/// Whether the variant consumes the AT graph as key/value source.
bool fusion_uses_key_graph(FusionVariant v);

struct RefineParams {
  Tensor kernel; // k×d×d
  Tensor bias;   // d
  Tensor gamma;  // d, undefined for the key graph
  Tensor beta;
};

struct BranchParams {
  Tensor w_q, w_k, w_v;       // d×d
  Tensor caf_kernel, caf_bias; // k×2d×d, d
  Tensor w_f, b_f, w_g, b_g;   // gate
  Tensor w_fc, b_fc;           // concatenation + FC replacement (2d×d, d)
};

struct FusionParams {
  FusionVariant variant = FusionVariant::Full;
  std::size_t heads = 1;
  std::array<RefineParams, 3> refine; // indexed by GraphPair; AT only with a key graph
  std::vector<std::array<BranchParams, 2>> rounds;

  static FusionParams init(std::size_t d, std::size_t kernel, std::size_t rounds,
                           std::size_t heads, FusionVariant variant, Rng &rng);
  void collect(ParamList &out, const std::string &prefix) const;
};

struct FusionState {
  Tensor refined_va; // H̃_VA
  Tensor refined_tv; // H̃_TV
  Tensor key_at;     // H_AT after convolution, before normalization
  std::vector<std::array<Tensor, 2>> round_inputs;
  std::vector<std::array<Tensor, 2>> round_outputs;
  Tensor z; // N×2d
};

/// Convolution along the node sequence only.
Tensor graph_conv(const Tensor &h, const RefineParams &params);
/// Convolution followed by layer normalization.
Tensor graph_refine(const Tensor &h, const RefineParams &params, double ln_eps = 1e-5);

/// softmax(H̃1 W_Q (H2 W_K)ᵀ / sqrt(d)) · H2 W_V.
Tensor cross_attention(const Tensor &query, const Tensor &key_value, const BranchParams &params);

/// Gated fusion of a query and its attended features.
Tensor caf_fuse(const Tensor &query, const Tensor &attended, const BranchParams &params);

/// [query, attended] · W_fc + b_fc.
Tensor concat_fc_fuse(const Tensor &query, const Tensor &attended, const BranchParams &params);

/// One round over both branches. `queries` are updated in place with the
/// branch outputs.
void fusion_round(std::array<Tensor, 2> &queries, const Tensor &key_value,
                  const std::array<BranchParams, 2> &params, FusionVariant variant,
                  std::size_t heads);

/// z_i = [mean(B1_i, B1_{N+i}), mean(B2_i, B2_{N+i})].
Tensor readout(const Tensor &branch1, const Tensor &branch2);

/// Full fusion stage on per-graph node features (indexed by GraphPair).
FusionState fuse(const std::array<Tensor, 3> &graph_features, const FusionParams &params,
                 double ln_eps = 1e-5);

} // namespace synctva
