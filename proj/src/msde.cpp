// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/msde.hpp>

namespace synctva {

MsdeVariant parse_msde_variant(std::string_view tag) {
  if (tag == "full")
    return MsdeVariant::Full;
  if (tag == "removed")
    return MsdeVariant::Removed;
  if (tag == "gating_only")
    return MsdeVariant::GatingOnly;
  if (tag == "attention_only")
    return MsdeVariant::AttentionOnly;
  throw ConfigError("unknown msde variant '" + std::string(tag) + "'");
}

const char *msde_variant_name(MsdeVariant v) {
  switch (v) {
  case MsdeVariant::Full:
    return "full";
  case MsdeVariant::Removed:
    return "removed";
  case MsdeVariant::GatingOnly:
    return "gating_only";
  case MsdeVariant::AttentionOnly:
    return "attention_only";
  }
  return "?";
}

MsdeParams MsdeParams::init(std::size_t input_dim, std::size_t d, std::size_t heads,
                            std::size_t d_ff, MsdeVariant variant, Rng &rng) {
  if (heads == 0 || d % heads != 0)
    throw ConfigError("msde: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  MsdeParams p;
  p.variant = variant;
  p.heads = heads;
  p.w_in = glorot({input_dim, d}, input_dim, d, rng);
  const bool gate = variant == MsdeVariant::Full || variant == MsdeVariant::GatingOnly;
  const bool attn = variant == MsdeVariant::Full || variant == MsdeVariant::AttentionOnly;
  if (gate) {
    p.w_gate = glorot({d, d}, d, d, rng);
    p.b_gate = zeros_param({d});
  }
  if (attn) {
    p.w_q = glorot({d, d}, d, d, rng);
    p.w_k = glorot({d, d}, d, d, rng);
    p.w_v = glorot({d, d}, d, d, rng);
    p.w_o = glorot({d, d}, d, d, rng);
    p.ln1_gamma = ones_param({d});
    p.ln1_beta = zeros_param({d});
  }
  if (variant == MsdeVariant::Full) {
    p.w_ff1 = glorot({d, d_ff}, d, d_ff, rng);
    p.b_ff1 = zeros_param({d_ff});
    p.w_ff2 = glorot({d_ff, d}, d_ff, d, rng);
    p.b_ff2 = zeros_param({d});
    p.ln2_gamma = ones_param({d});
    p.ln2_beta = zeros_param({d});
  }
  return p;
}

void MsdeParams::collect(ParamList &out, const std::string &prefix) const {
  collect_param(out, prefix, "w_in", w_in);
  collect_param(out, prefix, "w_gate", w_gate);
  collect_param(out, prefix, "b_gate", b_gate);
  collect_param(out, prefix, "w_q", w_q);
  collect_param(out, prefix, "w_k", w_k);
  collect_param(out, prefix, "w_v", w_v);
  collect_param(out, prefix, "w_o", w_o);
  collect_param(out, prefix, "ln1_gamma", ln1_gamma);
  collect_param(out, prefix, "ln1_beta", ln1_beta);
  collect_param(out, prefix, "w_ff1", w_ff1);
  collect_param(out, prefix, "b_ff1", b_ff1);
  collect_param(out, prefix, "w_ff2", w_ff2);
  collect_param(out, prefix, "b_ff2", b_ff2);
  collect_param(out, prefix, "ln2_gamma", ln2_gamma);
  collect_param(out, prefix, "ln2_beta", ln2_beta);
}

Tensor msde_self_attention(const Tensor &x, const MsdeParams &params) {
  return matmul(multi_head_attention(x, x, params.w_q, params.w_k, params.w_v, params.heads),
                params.w_o);
}

namespace {

void require(const Tensor &t, MsdeVariant v, const char *what) {
  if (!t.defined())
    throw ConfigError(std::string("msde variant '") + msde_variant_name(v) + "' needs " + what +
                      " parameters that were not allocated");
}

Tensor maybe_dropout(const Tensor &x, const MsdeOptions &opt, Rng *rng) {
  if (!opt.train || opt.dropout == 0.0)
    return x;
  if (!rng)
    throw ConfigError("msde: dropout in train mode needs an rng");
  return dropout(x, opt.dropout, *rng);
}

Tensor forward_variant(MsdeVariant variant, const Tensor &features, const MsdeParams &p,
                       const MsdeOptions &opt, Rng *rng) {
  if (features.dim() != 2 || features.cols() != p.w_in.rows())
    throw DimensionError("msde: features " + shape_str(features.shape()) +
                         " do not match input projection " + shape_str(p.w_in.shape()));
  Tensor x0 = matmul(features, p.w_in);
  if (variant == MsdeVariant::Removed)
    return x0;

  if (variant == MsdeVariant::AttentionOnly) {
    require(p.w_q, variant, "attention");
    Tensor attn = maybe_dropout(msde_self_attention(x0, p), opt, rng);
    return layer_norm(add(x0, attn), p.ln1_gamma, p.ln1_beta, opt.ln_eps);
  }

  require(p.w_gate, variant, "gate");
  Tensor x1 = mul(x0, sigmoid(add_bias(matmul(x0, p.w_gate), p.b_gate)));
  if (variant == MsdeVariant::GatingOnly)
    return x1;

  require(p.w_q, variant, "attention");
  require(p.w_ff1, variant, "feedforward");
  Tensor attn = maybe_dropout(msde_self_attention(x1, p), opt, rng);
  Tensor x2 = layer_norm(add(x1, attn), p.ln1_gamma, p.ln1_beta, opt.ln_eps);
  Tensor hidden = maybe_dropout(relu(add_bias(matmul(x2, p.w_ff1), p.b_ff1)), opt, rng);
  Tensor ffn = add_bias(matmul(hidden, p.w_ff2), p.b_ff2);
  return layer_norm(add(x2, ffn), p.ln2_gamma, p.ln2_beta, opt.ln_eps);
}

} // namespace

Tensor msde_forward(const Tensor &features, const MsdeParams &params, const MsdeOptions &options,
                    Rng *rng) {
  return forward_variant(params.variant, features, params, options, rng);
}

MsdeForwardFn msde_ablation_variant(std::string_view tag) {
  const MsdeVariant v = parse_msde_variant(tag);
  return [v](const Tensor &f, const MsdeParams &p, const MsdeOptions &o, Rng *rng) {
    return forward_variant(v, f, p, o, rng);
  };
}

} // namespace synctva
