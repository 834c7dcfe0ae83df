// SPDX-License-Identifier: Apache-2.0
/**
 * @file   model.hpp
 * @brief  End-to-end model: enhancement, cross-modal graphs, fusion and the
 *         softmax classifier.
 */
#pragma once

#include <synctva/config.hpp>
#include <synctva/dataio.hpp>
#include <synctva/fusion.hpp>
#include <synctva/msde.hpp>
#include <synctva/xgraph.hpp>

#include <array>

namespace synctva {

struct ClassifierParams {
  Tensor weight; // C×2d
  Tensor bias;   // C

  static ClassifierParams init(std::size_t in_dim, std::size_t classes, Rng &rng);
};

/// softmax(z W_cᵀ + b_c), one probability row per utterance.
Tensor classify(const Tensor &z, const ClassifierParams &params);

/// Row-major N×cols tensor without gradient.
Tensor to_tensor(const Matrix &m);
Matrix to_matrix(const Tensor &t);

struct ForwardResult {
  std::array<Tensor, 3> enhanced; // per Modality
  GraphOutputs graphs;
  FusionState fusion;
  Tensor probs;
};

class SyncTvaModel {
public:
  /// Parameters are drawn from independent streams of Rng(cfg.seed) per
  /// module, so two variants share the initial values of every module they
  /// have in common.
  SyncTvaModel(ModelConfig cfg, ModalityDims dims, std::size_t classes);

  /// `rng` feeds dropout and is only used when `train` is set.
  ForwardResult forward(const Conversation &conv, bool train, Rng *rng = nullptr) const;

  /// Every trainable tensor with a stable dotted name.
  ParamList parameters() const;
  std::size_t parameter_count() const { return count_parameters(parameters()); }

  const ModelConfig &config() const { return cfg_; }
  /// The epoch count is the only field that may change after construction.
  void set_epoch_budget(std::size_t epochs) { cfg_.epochs = epochs; }
  const ModalityDims &dims() const { return dims_; }
  std::size_t classes() const { return classes_; }

  std::array<MsdeParams, 3> msde;
  XGraphParams xgraph;
  FusionParams fusion;
  ClassifierParams classifier;

private:
  ModelConfig cfg_;
  ModalityDims dims_;
  std::size_t classes_;
};

} // namespace synctva
