// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/trainer.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace synctva {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::ofstream open_text(const fs::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void close_text(std::ofstream &out, const fs::path &path) {
  out.flush();
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

int argmax_row(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

double mean_of(const std::vector<double> &v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

void write_epoch_log_csv(const fs::path &path, const std::vector<EpochLog> &log) {
  auto out = open_text(path);
  out << "epoch,lr,step_loss,grad_norm,train_loss,train_accuracy,train_wf1,valid_loss,"
         "valid_accuracy,valid_wf1\n";
  for (const EpochLog &e : log)
    out << e.epoch << ',' << format_number(e.lr) << ',' << format_number(e.step_loss) << ','
        << format_number(e.grad_norm) << ',' << format_number(e.train_loss) << ','
        << format_number(e.train_accuracy) << ',' << format_number(e.train_wf1) << ','
        << format_number(e.valid_loss) << ',' << format_number(e.valid_accuracy) << ','
        << format_number(e.valid_wf1) << '\n';
  close_text(out, path);
}

Evaluation evaluate(const SyncTvaModel &model, const FeatureSet &set, bool keep_features) {
  if (set.class_count() != model.classes())
    throw DataError(DataError::Kind::DimMismatch,
                    "dataset has " + std::to_string(set.class_count()) +
                      " classes, model was built for " + std::to_string(model.classes()));
  if (!(set.dims == model.dims()))
    throw DataError(DataError::Kind::DimMismatch, "dataset feature dims differ from the model's");
  NoGradGuard no_grad;
  Evaluation ev;
  const std::size_t total = set.utterance_count();
  const std::size_t zcols = 2 * model.config().d;
  const std::size_t raw_cols = set.dims.text + set.dims.audio + set.dims.visual;
  if (keep_features) {
    ev.fused = Matrix(total, zcols);
    ev.raw = Matrix(total, raw_cols);
  }
  double loss_sum = 0.0;
  std::size_t row = 0;
  for (const Conversation &conv : set.conversations) {
    const ForwardResult r = model.forward(conv, false);
    loss_sum += cross_entropy(r.probs, conv.labels).item() * static_cast<double>(conv.size());
    for (std::size_t i = 0; i < conv.size(); ++i, ++row) {
      ev.labels.push_back(conv.labels[i]);
      ev.predictions.push_back(
        argmax_row(r.probs.values().subspan(i * model.classes(), model.classes())));
      if (keep_features) {
        const auto z = r.fusion.z.values().subspan(i * zcols, zcols);
        std::copy(z.begin(), z.end(), ev.fused.data.begin() + static_cast<std::ptrdiff_t>(row * zcols));
        auto dst = ev.raw.data.begin() + static_cast<std::ptrdiff_t>(row * raw_cols);
        for (Modality m : kModalities) {
          const auto src = conv.features(m).row(i);
          dst = std::copy(src.begin(), src.end(), dst);
        }
      }
    }
  }
  ev.loss = total ? loss_sum / static_cast<double>(total)
                  : std::numeric_limits<double>::quiet_NaN();
  if (total)
    ev.report = evaluate_predictions(ev.labels, ev.predictions, model.classes());
  return ev;
}

DatasetSplit partition(const FeatureSet &set, const ModelConfig &cfg) {
  if (!cfg.train_on_all)
    return split(set, cfg.split, cfg.split_seed);
  DatasetSplit out;
  out.train = set;
  for (FeatureSet *p : {&out.valid, &out.test}) {
    p->dims = set.dims;
    p->class_names = set.class_names;
  }
  return out;
}

Trainer::Trainer(ModelConfig cfg, ModalityDims dims, std::vector<std::string> class_names)
    : model_(std::move(cfg), dims, class_names.size()), opt_(model_.parameters()),
      class_names_(std::move(class_names)) {}

double Trainer::train_step(const std::vector<const Conversation *> &batch, double lr,
                           const std::vector<Rng> &dropout_rngs, double *grad_norm) {
  const ModelConfig &cfg = model_.config();
  std::size_t utterances = 0;
  for (const Conversation *c : batch)
    utterances += c->size();
  if (utterances == 0)
    throw DataError(DataError::Kind::Malformed, "train_step: empty batch");
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Conversation &conv = *batch[b];
    try {
      Rng drng = dropout_rngs.at(b);
      const ForwardResult r = model_.forward(conv, true, &drng);
      const Tensor ce = cross_entropy(r.probs, conv.labels);
      const double w = static_cast<double>(conv.size()) / static_cast<double>(utterances);
      if (!std::isfinite(ce.item()))
        throw NumericError("cross_entropy", "non-finite loss");
      loss += w * ce.item();
      scale(ce, w).backward();
    } catch (const NumericError &e) {
      opt_.zero_grad();
      throw NumericError(e.op(), "training aborted at epoch " + std::to_string(epoch_ + 1) +
                                   ", conversation '" + conv.id + "': " + e.what() +
                                   " (first offending op: " + e.op() + ")");
    }
  }
  const double norm = clip_grad_norm(opt_.params(), cfg.grad_clip);
  if (!std::isfinite(norm)) {
    opt_.zero_grad();
    throw NumericError("backward", "training aborted at epoch " + std::to_string(epoch_ + 1) +
                                     ": non-finite gradient norm");
  }
  if (grad_norm)
    *grad_norm = norm;
  opt_.step({lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
  return loss;
}

const EpochLog &Trainer::run_epoch(const FeatureSet &train, const FeatureSet &valid) {
  if (train.conversations.empty())
    throw DataError(DataError::Kind::Malformed, "train split is empty");
  const ModelConfig &cfg = model_.config();
  const Rng root(cfg.seed);
  const std::vector<std::size_t> order =
    shuffled_indices(train.conversations.size(), root.split("shuffle").split(epoch_));
  const Rng dropout_root = root.split("dropout").split(epoch_);

  EpochLog e;
  e.epoch = epoch_ + 1;
  e.lr = scheduled_lr(cfg, epoch_);
  double weighted = 0.0;
  std::size_t seen = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
    std::vector<const Conversation *> batch;
    std::vector<Rng> rngs;
    std::size_t n = 0;
    for (std::size_t k = start; k < stop; ++k) {
      batch.push_back(&train.conversations[order[k]]);
      rngs.push_back(dropout_root.split(order[k]));
      n += batch.back()->size();
    }
    double norm = 0.0;
    weighted += train_step(batch, e.lr, rngs, &norm) * static_cast<double>(n);
    seen += n;
    e.grad_norm = std::max(e.grad_norm, norm);
  }
  e.step_loss = weighted / static_cast<double>(seen);

  const Evaluation tr = evaluate(model_, train);
  e.train_loss = tr.loss;
  e.train_accuracy = tr.report.accuracy;
  e.train_wf1 = tr.report.weighted_f1;
  if (valid.conversations.empty()) {
    e.valid_loss = e.valid_accuracy = e.valid_wf1 = std::numeric_limits<double>::quiet_NaN();
  } else {
    const Evaluation va = evaluate(model_, valid);
    e.valid_loss = va.loss;
    e.valid_accuracy = va.report.accuracy;
    e.valid_wf1 = va.report.weighted_f1;
  }
  ++epoch_;
  const double target = cfg.target_train_accuracy;
  if (target > 0.0 && e.train_accuracy >= target && e.train_wf1 >= target)
    stopped_ = true;
  log_.push_back(e);
  return log_.back();
}

void Trainer::fit(const FeatureSet &train, const FeatureSet &valid, std::size_t until_epoch,
                  const std::function<void(const EpochLog &)> &on_epoch) {
  while (!finished() && (until_epoch == 0 || epoch_ < until_epoch)) {
    const EpochLog &e = run_epoch(train, valid);
    if (on_epoch)
      on_epoch(e);
  }
}

void Trainer::set_epoch_budget(std::size_t epochs) {
  if (epochs == model_.config().epochs)
    return;
  if (model_.config().schedule == LrSchedule::Cosine)
    throw ConfigError("the epoch budget cannot change under a cosine schedule");
  model_.set_epoch_budget(epochs);
}

namespace {

ordered_json epoch_to_json(const EpochLog &e) {
  // NaN is not representable in JSON; null stands in for it.
  auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
  return {{"epoch", e.epoch},
          {"lr", num(e.lr)},
          {"step_loss", num(e.step_loss)},
          {"grad_norm", num(e.grad_norm)},
          {"train_loss", num(e.train_loss)},
          {"train_accuracy", num(e.train_accuracy)},
          {"train_wf1", num(e.train_wf1)},
          {"valid_loss", num(e.valid_loss)},
          {"valid_accuracy", num(e.valid_accuracy)},
          {"valid_wf1", num(e.valid_wf1)}};
}

EpochLog epoch_from_json(const json &j) {
  auto num = [&](const char *k) {
    const json &v = j.at(k);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  EpochLog e;
  e.epoch = j.at("epoch").get<std::size_t>();
  e.lr = num("lr");
  e.step_loss = num("step_loss");
  e.grad_norm = num("grad_norm");
  e.train_loss = num("train_loss");
  e.train_accuracy = num("train_accuracy");
  e.train_wf1 = num("train_wf1");
  e.valid_loss = num("valid_loss");
  e.valid_accuracy = num("valid_accuracy");
  e.valid_wf1 = num("valid_wf1");
  return e;
}

constexpr const char *kCheckpointFormat = "synctva-checkpoint";

} // namespace

void Trainer::save_checkpoint(const fs::path &dir) const {
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  if (!ec)
    fs::create_directories(dir / "moments", ec);
  if (ec)
    throw IoError("cannot create checkpoint directory '" + dir.string() + "': " + ec.message());

  const ModelConfig &cfg = model_.config();
  ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = 1;
  j["config"] = config_to_json(cfg);
  j["dims"] = {{"text", model_.dims().text},
               {"audio", model_.dims().audio},
               {"visual", model_.dims().visual}};
  j["class_names"] = class_names_;
  j["epoch"] = epoch_;
  j["stopped_early"] = stopped_;
  j["optimizer_step"] = opt_.step_count();
  j["rng"] = {{"seed", cfg.seed}, {"next_epoch", epoch_}};
  j["log"] = ordered_json::array();
  for (const EpochLog &e : log_)
    j["log"].push_back(epoch_to_json(e));
  j["tensors"] = ordered_json::array();
  const ParamList &params = opt_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const NamedParam &p = params[i];
    const std::string param_rel = "params/" + p.name + ".f64";
    const std::string m_rel = "moments/" + p.name + ".m.f64";
    const std::string v_rel = "moments/" + p.name + ".v.f64";
    write_f64_blob(dir / param_rel, p.tensor.values());
    write_f64_blob(dir / m_rel, opt_.first_moments()[i]);
    write_f64_blob(dir / v_rel, opt_.second_moments()[i]);
    j["tensors"].push_back(
      {{"name", p.name}, {"shape", p.tensor.shape()}, {"param", param_rel}, {"m", m_rel}, {"v", v_rel}});
  }
  const fs::path header = dir / "checkpoint.json";
  auto out = open_text(header);
  out << j.dump(2) << '\n';
  close_text(out, header);
}

Trainer Trainer::load_checkpoint(const fs::path &dir) {
  using K = DataError::Kind;
  const fs::path header = fs::is_directory(dir) ? dir / "checkpoint.json" : dir;
  const fs::path root = header.parent_path();
  std::ifstream in(header);
  if (!in)
    throw IoError("cannot open checkpoint '" + header.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw DataError(K::Malformed, "invalid checkpoint '" + header.string() + "': " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw DataError(K::Malformed, "'" + header.string() + "' is not a checkpoint");
    const ModelConfig cfg = config_from_json(j.at("config"));
    ModalityDims dims;
    dims.text = j.at("dims").at("text").get<std::size_t>();
    dims.audio = j.at("dims").at("audio").get<std::size_t>();
    dims.visual = j.at("dims").at("visual").get<std::size_t>();
    Trainer t(cfg, dims, j.at("class_names").get<std::vector<std::string>>());
    t.epoch_ = j.at("epoch").get<std::size_t>();
    t.stopped_ = j.at("stopped_early").get<bool>();
    t.opt_.set_step_count(j.at("optimizer_step").get<std::uint64_t>());
    for (const json &e : j.at("log"))
      t.log_.push_back(epoch_from_json(e));

    ParamList params = t.opt_.params();
    const json &tensors = j.at("tensors");
    if (tensors.size() != params.size())
      throw DataError(K::DimMismatch, "checkpoint holds " + std::to_string(tensors.size()) +
                                        " tensors, configuration expects " +
                                        std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const json &tj = tensors[i];
      const std::string name = tj.at("name").get<std::string>();
      if (name != params[i].name)
        throw DataError(K::DimMismatch, "checkpoint tensor '" + name + "' where '" +
                                          params[i].name + "' was expected");
      if (tj.at("shape").get<Shape>() != params[i].tensor.shape())
        throw DataError(K::DimMismatch, "checkpoint tensor '" + name + "' has shape " +
                                          shape_str(tj.at("shape").get<Shape>()) + ", expected " +
                                          shape_str(params[i].tensor.shape()));
      const std::size_t n = params[i].tensor.numel();
      const auto values = read_f64_blob(root / tj.at("param").get<std::string>(), n);
      auto dst = params[i].tensor.mutable_values();
      std::copy(values.begin(), values.end(), dst.begin());
      t.opt_.first_moments()[i] = read_f64_blob(root / tj.at("m").get<std::string>(), n);
      t.opt_.second_moments()[i] = read_f64_blob(root / tj.at("v").get<std::string>(), n);
    }
    return t;
  } catch (const json::exception &e) {
    throw DataError(K::Malformed, "invalid checkpoint '" + header.string() + "': " + e.what());
  }
}

std::vector<AblationRow> run_ablation_grid(const DatasetSplit &data, const ModelConfig &base,
                                           std::vector<std::string> tags,
                                           const AblationOptions &options) {
  if (options.seeds == 0)
    throw ConfigError("ablation: need at least one seed");
  tags.erase(std::remove(tags.begin(), tags.end(), "full"), tags.end());
  tags.insert(tags.begin(), "full");
  const FeatureSet &target = options.eval_split == EvalSplit::Train   ? data.train
                             : options.eval_split == EvalSplit::Valid ? data.valid
                                                                      : data.test;
  std::vector<AblationRow> rows;
  for (const std::string &tag : tags) {
    ModelConfig cfg = base;
    apply_ablation(cfg, tag);
    AblationRow row;
    row.tag = tag;
    for (const AblationSpec &s : ablation_catalog())
      if (s.tag == tag)
        row.description = s.description;
    for (std::size_t s = 0; s < options.seeds; ++s) {
      cfg.seed = base.seed + s;
      Trainer trainer(cfg, data.train.dims, data.train.class_names);
      row.parameters = trainer.model().parameter_count();
      trainer.fit(data.train, data.valid);
      const Evaluation ev = evaluate(trainer.model(), target);
      row.wf1.push_back(ev.report.weighted_f1);
      row.acc.push_back(ev.report.accuracy);
      if (options.on_run)
        options.on_run(tag, cfg.seed, ev);
    }
    row.mean_wf1 = mean_of(row.wf1);
    row.mean_acc = mean_of(row.acc);
    rows.push_back(std::move(row));
  }
  const AblationRow &full = rows.front();
  for (AblationRow &row : rows) {
    row.delta_wf1 = row.mean_wf1 - full.mean_wf1;
    row.delta_acc = row.mean_acc - full.mean_acc;
    if (options.seeds >= 2)
      row.ttest = paired_t_test(full.wf1, row.wf1);
  }
  return rows;
}

void write_ablation_csv(const fs::path &path, const std::vector<AblationRow> &rows) {
  auto out = open_text(path);
  out << "variant,description,parameters,wf1,acc,delta_wf1,delta_acc,t,p,significant\n";
  auto pct = [](double v) { return format_number(100.0 * v); };
  for (const AblationRow &r : rows) {
    out << r.tag << ",\"" << r.description << "\"," << r.parameters << ',' << pct(r.mean_wf1)
        << ',' << pct(r.mean_acc) << ',' << pct(r.delta_wf1) << ',' << pct(r.delta_acc) << ',';
    if (r.ttest)
      out << format_number(r.ttest->t) << ',' << format_number(r.ttest->p) << ','
          << (r.ttest->significant ? "yes" : "no") << '\n';
    else
      out << "n/a,n/a,n/a\n";
  }
  close_text(out, path);
}

} // namespace synctva
