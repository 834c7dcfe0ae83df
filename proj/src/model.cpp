// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/model.hpp>

namespace synctva {

ClassifierParams ClassifierParams::init(std::size_t in_dim, std::size_t classes, Rng &rng) {
  return {glorot({classes, in_dim}, in_dim, classes, rng), zeros_param({classes})};
}

Tensor classify(const Tensor &z, const ClassifierParams &params) {
  if (z.cols() != params.weight.cols())
    throw DimensionError("classify: z has " + std::to_string(z.cols()) +
                         " columns, classifier expects " + std::to_string(params.weight.cols()));
  return softmax_rows(add_bias(matmul(z, transpose(params.weight)), params.bias));
}

Tensor to_tensor(const Matrix &m) { return Tensor({m.rows, m.cols}, m.data); }

Matrix to_matrix(const Tensor &t) {
  const auto v = t.values();
  return Matrix(t.rows(), t.cols(), std::vector<double>(v.begin(), v.end()));
}

SyncTvaModel::SyncTvaModel(ModelConfig cfg, ModalityDims dims, std::size_t classes)
    : cfg_(std::move(cfg)), dims_(dims), classes_(classes) {
  cfg_.validate();
  if (classes_ < 2)
    throw ConfigError("model: need at least 2 classes, got " + std::to_string(classes_));
  const Rng root = Rng(cfg_.seed).split("init");
  for (Modality m : kModalities) {
    Rng r = root.split("msde").split(static_cast<std::uint64_t>(m));
    msde[static_cast<std::size_t>(m)] =
      MsdeParams::init(dims_.of(m), cfg_.d, cfg_.heads, cfg_.d_ff, cfg_.msde_variant, r);
  }
  const bool at = fusion_uses_key_graph(cfg_.fusion_variant);
  Rng rg = root.split("xgraph");
  xgraph = XGraphParams::init(cfg_.d, cfg_.gcn_layers, cfg_.graph_variant, cfg_.share_gcn_weights,
                              {true, true, at}, rg);
  Rng rf = root.split("fusion");
  fusion = FusionParams::init(cfg_.d, cfg_.conv_kernel, cfg_.fusion_rounds, cfg_.heads,
                              cfg_.fusion_variant, rf);
  Rng rc = root.split("classifier");
  classifier = ClassifierParams::init(2 * cfg_.d, classes_, rc);
}

ForwardResult SyncTvaModel::forward(const Conversation &conv, bool train, Rng *rng) const {
  if (conv.size() == 0)
    throw DataError(DataError::Kind::Malformed, "conversation '" + conv.id + "' is empty");
  ForwardResult out;
  MsdeOptions opts{cfg_.dropout, train, cfg_.ln_eps};
  for (Modality m : kModalities) {
    const Matrix &f = conv.features(m);
    if (f.cols != dims_.of(m) || f.rows != conv.size())
      throw DataError(DataError::Kind::DimMismatch,
                      "conversation '" + conv.id + "': " + modality_name(m) + " features are " +
                        std::to_string(f.rows) + "x" + std::to_string(f.cols) + ", expected " +
                        std::to_string(conv.size()) + "x" + std::to_string(dims_.of(m)));
    Rng child = rng ? rng->split(static_cast<std::uint64_t>(m)) : Rng(0);
    out.enhanced[static_cast<std::size_t>(m)] =
      msde_forward(to_tensor(f), msde[static_cast<std::size_t>(m)], opts, rng ? &child : nullptr);
  }
  const bool at = fusion_uses_key_graph(cfg_.fusion_variant);
  out.graphs = build_graphs(out.enhanced[0], out.enhanced[1], out.enhanced[2], xgraph,
                            {true, true, at});
  out.fusion = fuse(out.graphs.features, fusion, cfg_.ln_eps);
  out.probs = classify(out.fusion.z, classifier);
  return out;
}

ParamList SyncTvaModel::parameters() const {
  ParamList out;
  for (Modality m : kModalities)
    msde[static_cast<std::size_t>(m)].collect(out, std::string("msde.") + modality_name(m) + ".");
  xgraph.collect(out, "xgraph.");
  fusion.collect(out, "fusion.");
  collect_param(out, "classifier.", "weight", classifier.weight);
  collect_param(out, "classifier.", "bias", classifier.bias);
  return out;
}

} // namespace synctva
