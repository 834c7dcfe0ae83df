// SPDX-License-Identifier: Apache-2.0
#include <synctva/config.hpp>
#include <synctva/errors.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace synctva {

void ModelConfig::validate() const {
  auto fail = [](const std::string &msg) { throw ConfigError("config: " + msg); };
  if (d == 0 || d_ff == 0)
    fail("d and d_ff must be positive");
  if (heads == 0 || d % heads != 0)
    fail("d=" + std::to_string(d) + " is not divisible by heads=" + std::to_string(heads));
  if (conv_kernel % 2 == 0)
    fail("conv_kernel must be odd");
  if (gcn_layers == 0)
    fail("gcn_layers must be >= 1");
  if (fusion_rounds == 0)
    fail("fusion_rounds must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0))
    fail("dropout must lie in [0, 1)");
  if (!(ln_eps > 0.0))
    fail("ln_eps must be positive");
  if (!(lr > 0.0))
    fail("lr must be positive");
  if (!(lr_min >= 0.0 && lr_min <= lr))
    fail("lr_min must lie in [0, lr]");
  if (!(weight_decay >= 0.0))
    fail("weight_decay must be nonnegative");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
    fail("beta1 and beta2 must lie in (0, 1)");
  if (!(adam_eps > 0.0))
    fail("adam_eps must be positive");
  if (!(grad_clip >= 0.0))
    fail("grad_clip must be nonnegative");
  if (batch_size == 0)
    fail("batch_size must be >= 1");
  if (!(target_train_accuracy >= 0.0 && target_train_accuracy <= 1.0))
    fail("target_train_accuracy must lie in [0, 1]");
  if (lambda_s != 1.0 || lambda_o != 1.0)
    fail("lambda_s / lambda_o weight auxiliary losses that do not exist; only 1 is accepted");
}

nlohmann::ordered_json config_to_json(const ModelConfig &c) {
  nlohmann::ordered_json j;
  j["d"] = c.d;
  j["d_ff"] = c.d_ff;
  j["heads"] = c.heads;
  j["conv_kernel"] = c.conv_kernel;
  j["gcn_layers"] = c.gcn_layers;
  j["fusion_rounds"] = c.fusion_rounds;
  j["share_gcn_weights"] = c.share_gcn_weights;
  j["dropout"] = c.dropout;
  j["ln_eps"] = c.ln_eps;
  j["msde_variant"] = msde_variant_name(c.msde_variant);
  j["graph_variant"] = graph_variant_name(c.graph_variant);
  j["fusion_variant"] = fusion_variant_name(c.fusion_variant);
  j["ablation"] = c.ablation;
  j["lr"] = c.lr;
  j["lr_min"] = c.lr_min;
  j["schedule"] = c.schedule == LrSchedule::Cosine ? "cosine" : "constant";
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["grad_clip"] = c.grad_clip;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["target_train_accuracy"] = c.target_train_accuracy;
  j["lambda_s"] = c.lambda_s;
  j["lambda_o"] = c.lambda_o;
  j["split"] = {{"train", c.split.train}, {"valid", c.split.valid}, {"test", c.split.test}};
  j["split_seed"] = c.split_seed;
  j["train_on_all"] = c.train_on_all;
  return j;
}

ModelConfig config_from_json(const nlohmann::json &j, ModelConfig c) {
  if (!j.is_object())
    throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known = {
    "d", "d_ff", "heads", "conv_kernel", "gcn_layers", "fusion_rounds", "share_gcn_weights",
    "dropout", "ln_eps", "msde_variant", "graph_variant", "fusion_variant", "ablation", "lr",
    "lr_min", "schedule", "weight_decay", "beta1", "beta2", "adam_eps", "grad_clip",
    "batch_size", "epochs", "seed", "target_train_accuracy", "lambda_s", "lambda_o", "split",
    "split_seed", "train_on_all"};
  for (const auto &[key, _] : j.items())
    if (!known.count(key))
      throw ConfigError("config: unknown key '" + key + "'");
  try {
    auto get = [&](const char *key, auto &field) {
      if (j.contains(key))
        field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    // An ablation tag sets the variants first so explicit variant keys win.
    if (j.contains("ablation"))
      apply_ablation(c, j.at("ablation").get<std::string>());
    get("d", c.d);
    get("d_ff", c.d_ff);
    get("heads", c.heads);
    get("conv_kernel", c.conv_kernel);
    get("gcn_layers", c.gcn_layers);
    get("fusion_rounds", c.fusion_rounds);
    get("share_gcn_weights", c.share_gcn_weights);
    get("dropout", c.dropout);
    get("ln_eps", c.ln_eps);
    if (j.contains("msde_variant"))
      c.msde_variant = parse_msde_variant(j.at("msde_variant").get<std::string>());
    if (j.contains("graph_variant"))
      c.graph_variant = parse_graph_variant(j.at("graph_variant").get<std::string>());
    if (j.contains("fusion_variant"))
      c.fusion_variant = parse_fusion_variant(j.at("fusion_variant").get<std::string>());
    get("lr", c.lr);
    get("lr_min", c.lr_min);
    if (j.contains("schedule")) {
      const auto s = j.at("schedule").get<std::string>();
      if (s == "constant")
        c.schedule = LrSchedule::Constant;
      else if (s == "cosine")
        c.schedule = LrSchedule::Cosine;
      else
        throw ConfigError("config: unknown schedule '" + s + "'");
    }
    get("weight_decay", c.weight_decay);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("adam_eps", c.adam_eps);
    get("grad_clip", c.grad_clip);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("seed", c.seed);
    get("target_train_accuracy", c.target_train_accuracy);
    get("lambda_s", c.lambda_s);
    get("lambda_o", c.lambda_o);
    if (j.contains("split")) {
      const auto &s = j.at("split");
      c.split.train = s.at("train").get<double>();
      c.split.valid = s.at("valid").get<double>();
      c.split.test = s.at("test").get<double>();
    }
    get("split_seed", c.split_seed);
    get("train_on_all", c.train_on_all);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

const std::vector<AblationSpec> &ablation_catalog() {
  static const std::vector<AblationSpec> catalog = {
    {"full", "Full model"},
    {"A1", "Remove MSDE"},
    {"A2", "Only retain gating"},
    {"A3", "Only retain self-attention"},
    {"B1", "V-A graph only"},
    {"B2", "V-A + T-V graphs"},
    {"B3", "No graph structure"},
    {"C1", "w/o CAF (self-attention only)"},
    {"C2", "w/o gating (concatenation + FC)"},
    {"D1", "Single fusion"},
  };
  return catalog;
}

void apply_ablation(ModelConfig &cfg, std::string_view tag) {
  const auto &cat = ablation_catalog();
  if (std::none_of(cat.begin(), cat.end(), [&](const AblationSpec &s) { return s.tag == tag; }))
    throw ConfigError("unknown ablation tag '" + std::string(tag) + "'");
  cfg.msde_variant = MsdeVariant::Full;
  cfg.graph_variant = GraphVariant::Full;
  cfg.fusion_variant = FusionVariant::Full;
  cfg.ablation = std::string(tag);
  if (tag == "A1")
    cfg.msde_variant = MsdeVariant::Removed;
  else if (tag == "A2")
    cfg.msde_variant = MsdeVariant::GatingOnly;
  else if (tag == "A3")
    cfg.msde_variant = MsdeVariant::AttentionOnly;
  else if (tag == "B1")
    cfg.graph_variant = GraphVariant::VaOnly;
  else if (tag == "B2")
    cfg.graph_variant = GraphVariant::VaTv;
  else if (tag == "B3")
    cfg.graph_variant = GraphVariant::None;
  else if (tag == "C1")
    cfg.fusion_variant = FusionVariant::NoCaf;
  else if (tag == "C2")
    cfg.fusion_variant = FusionVariant::NoGating;
  else if (tag == "D1")
    cfg.fusion_variant = FusionVariant::SingleRound;
}

} // namespace synctva
