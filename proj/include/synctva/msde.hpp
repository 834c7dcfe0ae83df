// SPDX-License-Identifier: Apache-2.0
/**
 * @file   msde.hpp
 * @brief  Modality-specific dynamic enhancement.
 *
 * Per modality, with F the N×d_m feature matrix:
 *
 *   X0 = F · W_in
 *   X1 = X0 ⊙ sigmoid(X0 · W_gate + b_gate)
 *   X2 = LayerNorm(X1 + MHSA(X1))
 *   X3 = LayerNorm(X2 + FFN(X2)),   FFN(x) = ReLU(x W1 + b1) W2 + b2
 *
 * Dropout (train mode only) hits the attention output and the FFN hidden
 * activation. There is no positional encoding, so the block is
 * permutation-equivariant over utterances.
 */
#pragma once

#include <synctva/nn.hpp>

#include <functional>
#include <string_view>

namespace synctva {

enum class MsdeVariant { Full, Removed, GatingOnly, AttentionOnly };

MsdeVariant parse_msde_variant(std::string_view tag);
const char *msde_variant_name(MsdeVariant v);

struct MsdeParams {
  MsdeVariant variant = MsdeVariant::Full;
  std::size_t heads = 1;
  Tensor w_in;
  Tensor w_gate, b_gate;
  Tensor w_q, w_k, w_v, w_o;
  Tensor ln1_gamma, ln1_beta;
  Tensor w_ff1, b_ff1, w_ff2, b_ff2;
  Tensor ln2_gamma, ln2_beta;

  /// Allocates only the tensors `variant` uses.
  static MsdeParams init(std::size_t input_dim, std::size_t d, std::size_t heads,
                         std::size_t d_ff, MsdeVariant variant, Rng &rng);

  std::size_t output_dim() const { return w_in.cols(); }
  void collect(ParamList &out, const std::string &prefix) const;
};

struct MsdeOptions {
  double dropout = 0.0;
  bool train = false;
  double ln_eps = 1e-5;
};

/// `rng` is only drawn from when options.train and dropout > 0.
Tensor msde_forward(const Tensor &features, const MsdeParams &params, const MsdeOptions &options,
                    Rng *rng = nullptr);

/// Self-attention sub-block on X (heads split d), followed by W_o.
Tensor msde_self_attention(const Tensor &x, const MsdeParams &params);

using MsdeForwardFn =
  std::function<Tensor(const Tensor &, const MsdeParams &, const MsdeOptions &, Rng *)>;

/// Forward function for an ablation tag ("full", "removed", "gating_only",
/// "attention_only"). The returned callable ignores params.variant.
MsdeForwardFn msde_ablation_variant(std::string_view tag);

} // namespace synctva
