// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/fusion.hpp>
#include <synctva/xgraph.hpp>

namespace synctva {

FusionVariant parse_fusion_variant(std::string_view tag) {
  if (tag == "full")
    return FusionVariant::Full;
  if (tag == "no_caf")
    return FusionVariant::NoCaf;
  if (tag == "no_gating")
    return FusionVariant::NoGating;
  if (tag == "single_round")
    return FusionVariant::SingleRound;
  throw ConfigError("unknown fusion variant '" + std::string(tag) + "'");
}

const char *fusion_variant_name(FusionVariant v) {
  switch (v) {
  case FusionVariant::Full:
    return "full";
  case FusionVariant::NoCaf:
    return "no_caf";
  case FusionVariant::NoGating:
    return "no_gating";
  case FusionVariant::SingleRound:
    return "single_round";
  }
  return "?";
}

bool fusion_uses_key_graph(FusionVariant v) { return v != FusionVariant::NoCaf; }

FusionParams FusionParams::init(std::size_t d, std::size_t kernel, std::size_t rounds,
                                std::size_t heads, FusionVariant variant, Rng &rng) {
  if (kernel % 2 == 0)
    throw ConfigError("fusion: conv kernel size must be odd, got " + std::to_string(kernel));
  if (rounds == 0)
    throw ConfigError("fusion: need at least one round");
  if (heads == 0 || d % heads != 0)
    throw ConfigError("fusion: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  FusionParams p;
  p.variant = variant;
  p.heads = heads;
  const bool key_graph = fusion_uses_key_graph(variant);
  for (GraphPair pair : kGraphPairs) {
    if (pair == GraphPair::AT && !key_graph)
      continue;
    RefineParams &r = p.refine[static_cast<std::size_t>(pair)];
    r.kernel = glorot({kernel, d, d}, kernel * d, d, rng);
    r.bias = zeros_param({d});
    if (pair != GraphPair::AT) {
      r.gamma = ones_param({d});
      r.beta = zeros_param({d});
    }
  }
  const std::size_t n_rounds = variant == FusionVariant::SingleRound ? 1 : rounds;
  for (std::size_t r = 0; r < n_rounds; ++r) {
    std::array<BranchParams, 2> round;
    for (BranchParams &b : round) {
      b.w_q = glorot({d, d}, d, d, rng);
      b.w_k = glorot({d, d}, d, d, rng);
      b.w_v = glorot({d, d}, d, d, rng);
      if (variant == FusionVariant::NoGating) {
        b.w_fc = glorot({2 * d, d}, 2 * d, d, rng);
        b.b_fc = zeros_param({d});
      } else {
        b.caf_kernel = glorot({kernel, 2 * d, d}, kernel * 2 * d, d, rng);
        b.caf_bias = zeros_param({d});
        b.w_f = glorot({d, d}, d, d, rng);
        b.b_f = zeros_param({d});
        b.w_g = glorot({d, d}, d, d, rng);
        b.b_g = zeros_param({d});
      }
    }
    p.rounds.push_back(std::move(round));
  }
  return p;
}

void FusionParams::collect(ParamList &out, const std::string &prefix) const {
  for (GraphPair pair : kGraphPairs) {
    const RefineParams &r = refine[static_cast<std::size_t>(pair)];
    const std::string base = prefix + "refine_" + graph_pair_name(pair) + ".";
    collect_param(out, base, "kernel", r.kernel);
    collect_param(out, base, "bias", r.bias);
    collect_param(out, base, "ln_gamma", r.gamma);
    collect_param(out, base, "ln_beta", r.beta);
  }
  for (std::size_t r = 0; r < rounds.size(); ++r)
    for (std::size_t b = 0; b < 2; ++b) {
      const BranchParams &p = rounds[r][b];
      const std::string base =
        prefix + "round" + std::to_string(r) + ".branch" + std::to_string(b) + ".";
      collect_param(out, base, "w_q", p.w_q);
      collect_param(out, base, "w_k", p.w_k);
      collect_param(out, base, "w_v", p.w_v);
      collect_param(out, base, "caf_kernel", p.caf_kernel);
      collect_param(out, base, "caf_bias", p.caf_bias);
      collect_param(out, base, "w_f", p.w_f);
      collect_param(out, base, "b_f", p.b_f);
      collect_param(out, base, "w_g", p.w_g);
      collect_param(out, base, "b_g", p.b_g);
      collect_param(out, base, "w_fc", p.w_fc);
      collect_param(out, base, "b_fc", p.b_fc);
    }
}

Tensor graph_conv(const Tensor &h, const RefineParams &params) {
  return conv1d_seq(h, params.kernel, params.bias);
}

Tensor graph_refine(const Tensor &h, const RefineParams &params, double ln_eps) {
  return layer_norm(graph_conv(h, params), params.gamma, params.beta, ln_eps);
}

Tensor cross_attention(const Tensor &query, const Tensor &key_value, const BranchParams &params) {
  if (query.cols() != key_value.cols())
    throw DimensionError("cross_attention: query " + shape_str(query.shape()) +
                         " and key/value " + shape_str(key_value.shape()) +
                         " differ in feature width");
  return multi_head_attention(query, key_value, params.w_q, params.w_k, params.w_v, 1);
}

Tensor caf_fuse(const Tensor &query, const Tensor &attended, const BranchParams &params) {
  if (query.shape() != attended.shape())
    throw DimensionError("caf_fuse: query " + shape_str(query.shape()) + " and attended " +
                         shape_str(attended.shape()) + " differ");
  Tensor fused = conv1d_seq(concat(query, attended, 1), params.caf_kernel, params.caf_bias);
  Tensor gate = sigmoid(add_bias(matmul(fused, params.w_f), params.b_f));
  Tensor candidate = tanh(add_bias(matmul(fused, params.w_g), params.b_g));
  return mul(gate, candidate);
}

Tensor concat_fc_fuse(const Tensor &query, const Tensor &attended, const BranchParams &params) {
  if (query.shape() != attended.shape())
    throw DimensionError("concat_fc_fuse: query " + shape_str(query.shape()) +
                         " and attended " + shape_str(attended.shape()) + " differ");
  return add_bias(matmul(concat(query, attended, 1), params.w_fc), params.b_fc);
}

void fusion_round(std::array<Tensor, 2> &queries, const Tensor &key_value,
                  const std::array<BranchParams, 2> &params, FusionVariant variant,
                  std::size_t heads) {
  for (std::size_t b = 0; b < 2; ++b) {
    const BranchParams &p = params[b];
    const Tensor &q = queries[b];
    Tensor attended =
      variant == FusionVariant::NoCaf
        ? multi_head_attention(q, q, p.w_q, p.w_k, p.w_v, heads)
        : cross_attention(q, key_value, p);
    queries[b] = variant == FusionVariant::NoGating ? concat_fc_fuse(q, attended, p)
                                                    : caf_fuse(q, attended, p);
  }
}

Tensor readout(const Tensor &branch1, const Tensor &branch2) {
  if (!branch1.defined() || !branch2.defined())
    throw DimensionError("readout: both branch outputs are required");
  if (branch1.shape() != branch2.shape())
    throw DimensionError("readout: branch shapes " + shape_str(branch1.shape()) + " and " +
                         shape_str(branch2.shape()) + " differ");
  return concat(pair_mean_rows(branch1), pair_mean_rows(branch2), 1);
}

FusionState fuse(const std::array<Tensor, 3> &graph_features, const FusionParams &params,
                 double ln_eps) {
  const auto va = static_cast<std::size_t>(GraphPair::VA);
  const auto tv = static_cast<std::size_t>(GraphPair::TV);
  const auto at = static_cast<std::size_t>(GraphPair::AT);
  FusionState state;
  state.refined_va = graph_refine(graph_features[va], params.refine[va], ln_eps);
  state.refined_tv = graph_refine(graph_features[tv], params.refine[tv], ln_eps);
  if (fusion_uses_key_graph(params.variant))
    state.key_at = graph_conv(graph_features[at], params.refine[at]);
  std::array<Tensor, 2> queries = {state.refined_va, state.refined_tv};
  for (const auto &round : params.rounds) {
    state.round_inputs.push_back(queries);
    fusion_round(queries, state.key_at, round, params.variant, params.heads);
    state.round_outputs.push_back(queries);
  }
  state.z = readout(queries[0], queries[1]);
  return state;
}

} // namespace synctva
