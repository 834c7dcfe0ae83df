// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Model, ablation and optimizer configuration.
 */
#pragma once

#include <synctva/dataio.hpp>
#include <synctva/fusion.hpp>
#include <synctva/msde.hpp>
#include <synctva/xgraph.hpp>

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace synctva {

enum class LrSchedule { Constant, Cosine };

struct ModelConfig {
  // Architecture.
  std::size_t d = 64;
  std::size_t d_ff = 256;
  std::size_t heads = 4;
  std::size_t conv_kernel = 3;
  std::size_t gcn_layers = 1;
  std::size_t fusion_rounds = 2;
  bool share_gcn_weights = false;
  double dropout = 0.2;
  double ln_eps = 1e-5;
  MsdeVariant msde_variant = MsdeVariant::Full;
  GraphVariant graph_variant = GraphVariant::Full;
  FusionVariant fusion_variant = FusionVariant::Full;
  std::string ablation = "full";

  // Optimization.
  double lr = 1e-4;
  double lr_min = 0.0;
  LrSchedule schedule = LrSchedule::Constant;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0; // global-norm clip; 0 disables
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 7;
  /// Stop once train accuracy and train weighted F1 both reach this; 0 disables.
  double target_train_accuracy = 0.0;

  // Reserved auxiliary-loss weights. Only a single cross-entropy term
  // exists, so anything other than 1 is rejected.
  double lambda_s = 1.0;
  double lambda_o = 1.0;

  // Data split. With train_on_all the whole dataset is the train part and
  // valid/test are empty; the ratios are then ignored.
  SplitRatios split;
  std::uint64_t split_seed = 7;
  bool train_on_all = false;

  /// Throws ConfigError on any invalid field.
  void validate() const;
};

nlohmann::ordered_json config_to_json(const ModelConfig &cfg);
/// Overlays the keys present in `j` onto `base`; unknown keys are errors.
ModelConfig config_from_json(const nlohmann::json &j, ModelConfig base = {});

struct AblationSpec {
  std::string tag;
  std::string description;
};

/// full, A1-A3, B1-B3, C1, C2, D1 in table order.
const std::vector<AblationSpec> &ablation_catalog();
/// Resets all three variant fields to the tag's setting.
void apply_ablation(ModelConfig &cfg, std::string_view tag);

} // namespace synctva
