// SPDX-License-Identifier: Apache-2.0
#include <synctva/cli.hpp>
#include <synctva/errors.hpp>
#include <synctva/trainer.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace synctva {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void ensure_dir(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

struct Manifest {
  ordered_json doc;
  std::vector<std::string> outputs;
  Clock::time_point start = Clock::now();

  explicit Manifest(const std::string &command) { doc["command"] = command; }

  void write(const fs::path &dir) {
    outputs.push_back("run.json");
    doc["outputs"] = outputs;
    doc["timings"]["wall_seconds"] = seconds_since(start);
    const fs::path path = dir / "run.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out)
      throw IoError("cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << '\n';
    if (!out)
      throw IoError("write failed for '" + path.string() + "'");
  }
};

// Flags shared by train and ablate. Unset flags leave the config untouched,
// giving defaults < config file < flags.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed, split_seed;
  std::optional<double> lr, lr_min, dropout, weight_decay, grad_clip, target_acc;
  std::optional<std::size_t> batch_size, epochs, d, d_ff, heads, kernel, gcn_layers, rounds;
  std::optional<std::string> ablation, schedule;
  bool no_clip = false;
  bool share_gcn = false;
  bool no_split = false;

  void attach(CLI::App &app) {
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Model seed");
    app.add_option("--split-seed", split_seed, "Seed for the conversation-level split");
    app.add_option("--lr", lr, "Learning rate");
    app.add_option("--lr-min", lr_min, "Minimum learning rate; enables cosine decay");
    app.add_option("--schedule", schedule, "constant or cosine")
      ->check(CLI::IsMember({"constant", "cosine"}));
    app.add_option("--batch-size", batch_size, "Conversations per batch");
    app.add_option("--dropout", dropout, "Dropout probability");
    app.add_option("--weight-decay", weight_decay, "Decoupled weight decay");
    app.add_option("--epochs", epochs, "Epoch budget");
    app.add_option("--grad-clip", grad_clip, "Global gradient-norm clip");
    app.add_flag("--no-clip", no_clip, "Disable gradient clipping");
    app.add_option("--target-acc", target_acc,
                   "Stop once train accuracy and weighted F1 reach this value");
    app.add_option("--ablation", ablation, "full, A1-A3, B1-B3, C1, C2 or D1");
    app.add_option("--d", d, "Shared model width");
    app.add_option("--d-ff", d_ff, "Feed-forward width");
    app.add_option("--heads", heads, "Attention heads");
    app.add_option("--kernel", kernel, "Fusion convolution kernel size (odd)");
    app.add_option("--gcn-layers", gcn_layers, "GCN layers per graph");
    app.add_option("--rounds", rounds, "Fusion rounds");
    app.add_flag("--share-gcn", share_gcn, "Share GCN weights across graphs");
    app.add_flag("--no-split", no_split, "Train on the whole dataset (no valid/test parts)");
  }

  ModelConfig resolve() const {
    ModelConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in)
        throw IoError("cannot open config '" + config_path + "'");
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config '" + config_path + "': " + e.what());
      }
      cfg = config_from_json(j, cfg);
    }
    if (ablation)
      apply_ablation(cfg, *ablation);
    if (seed)
      cfg.seed = *seed;
    if (split_seed)
      cfg.split_seed = *split_seed;
    if (lr)
      cfg.lr = *lr;
    if (lr_min) {
      cfg.lr_min = *lr_min;
      cfg.schedule = LrSchedule::Cosine;
    }
    if (schedule)
      cfg.schedule = *schedule == "cosine" ? LrSchedule::Cosine : LrSchedule::Constant;
    if (batch_size)
      cfg.batch_size = *batch_size;
    if (dropout)
      cfg.dropout = *dropout;
    if (weight_decay)
      cfg.weight_decay = *weight_decay;
    if (epochs)
      cfg.epochs = *epochs;
    if (grad_clip)
      cfg.grad_clip = *grad_clip;
    if (no_clip)
      cfg.grad_clip = 0.0;
    if (target_acc)
      cfg.target_train_accuracy = *target_acc;
    if (d)
      cfg.d = *d;
    if (d_ff)
      cfg.d_ff = *d_ff;
    if (heads)
      cfg.heads = *heads;
    if (kernel)
      cfg.conv_kernel = *kernel;
    if (gcn_layers)
      cfg.gcn_layers = *gcn_layers;
    if (rounds)
      cfg.fusion_rounds = *rounds;
    if (share_gcn)
      cfg.share_gcn_weights = true;
    if (no_split)
      cfg.train_on_all = true;
    cfg.validate();
    return cfg;
  }
};

const FeatureSet &pick_part(const DatasetSplit &s, const std::string &part) {
  if (part == "train")
    return s.train;
  if (part == "valid")
    return s.valid;
  return s.test;
}

ordered_json summary_json(const EpochLog &e) {
  return {{"epoch", e.epoch},
          {"train_loss", e.train_loss},
          {"train_accuracy", e.train_accuracy},
          {"train_wf1", e.train_wf1}};
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 7;
  std::size_t classes = 6;
  std::size_t conversations = 60;
  std::size_t min_utt = 4;
  std::size_t max_utt = 12;
  std::size_t dim = 32;
  double spread = 0.05;
};

int cmd_synth(const SynthArgs &a, std::ostream &out) {
  if (a.classes < 2)
    throw ConfigError("--classes must be at least 2");
  if (a.conversations == 0)
    throw ConfigError("--conversations must be positive");
  if (a.min_utt == 0 || a.min_utt > a.max_utt)
    throw ConfigError("need 1 <= --min-utt <= --max-utt");
  if (a.dim == 0)
    throw ConfigError("--dim must be positive");
  if (!(a.spread >= 0.0))
    throw ConfigError("--spread must be nonnegative");
  Manifest run("synth");
  SynthOptions opts;
  opts.seed = a.seed;
  opts.classes = a.classes;
  opts.conversations = a.conversations;
  opts.min_utterances = a.min_utt;
  opts.max_utterances = a.max_utt;
  opts.dims = {a.dim, a.dim, a.dim};
  opts.cluster_spread = a.spread;
  const fs::path dir(a.out);
  ensure_dir(dir);
  const fs::path manifest = save_featureset(synth_dataset(opts), dir);
  const std::string fp = dataset_fingerprint(manifest);
  run.doc["seed"] = a.seed;
  run.doc["synth"] = {{"classes", a.classes},     {"conversations", a.conversations},
                      {"min_utterances", a.min_utt}, {"max_utterances", a.max_utt},
                      {"dim", a.dim},             {"spread", a.spread}};
  run.doc["dataset_fingerprint"] = fp;
  run.doc["output_dir"] = dir.string();
  run.outputs.push_back("manifest.json");
  run.outputs.push_back("blobs/");
  run.write(dir);
  out << "dataset written to " << manifest.string() << "\nfingerprint " << fp << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out, resume;
  std::size_t stop_after = 0;
  bool quiet = false;
  ConfigFlags flags;
};

int cmd_train(const TrainArgs &a, std::ostream &out) {
  Manifest run("train");
  const fs::path dir(a.out);
  const FeatureSet data = load_featureset(a.data);
  const std::string fp = dataset_fingerprint(a.data);

  std::optional<Trainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(Trainer::load_checkpoint(a.resume));
    if (a.flags.epochs)
      trainer->set_epoch_budget(*a.flags.epochs);
    run.doc["resumed_from"] = a.resume;
    run.doc["resumed_at_epoch"] = trainer->epoch();
  } else {
    const ModelConfig cfg = a.flags.resolve();
    trainer.emplace(cfg, data.dims, data.class_names);
  }
  const ModelConfig &cfg = trainer->model().config();
  if (data.class_count() != trainer->model().classes() || !(data.dims == trainer->model().dims()))
    throw DataError(DataError::Kind::DimMismatch,
                    "dataset (C=" + std::to_string(data.class_count()) +
                      ") does not match the checkpoint (C=" +
                      std::to_string(trainer->model().classes()) + ") classes or feature dims");
  const DatasetSplit parts = partition(data, cfg);

  const std::size_t params = trainer->model().parameter_count();
  if (!a.quiet)
    out << "ablation " << cfg.ablation << ", " << params << " parameters, "
        << parts.train.conversations.size() << " train conversations\n";
  std::vector<double> epoch_seconds;
  auto t_epoch = Clock::now();
  trainer->fit(parts.train, parts.valid, a.stop_after, [&](const EpochLog &e) {
    epoch_seconds.push_back(seconds_since(t_epoch));
    t_epoch = Clock::now();
    if (!a.quiet)
      out << "epoch " << e.epoch << '/' << cfg.epochs << " loss " << format_number(e.train_loss)
          << " acc " << format_number(e.train_accuracy) << " wf1 " << format_number(e.train_wf1)
          << " valid_acc " << format_number(e.valid_accuracy) << '\n';
  });

  ensure_dir(dir);
  trainer->save_checkpoint(dir / "checkpoint");
  write_epoch_log_csv(dir / "train_log.csv", trainer->log());
  run.doc["config"] = config_to_json(cfg);
  run.doc["seed"] = cfg.seed;
  run.doc["dataset"] = fs::absolute(a.data).string();
  run.doc["dataset_fingerprint"] = fp;
  run.doc["output_dir"] = dir.string();
  run.doc["parameters"] = params;
  run.doc["epochs_completed"] = trainer->epoch();
  run.doc["stopped_early"] = trainer->stopped_early();
  if (!trainer->log().empty())
    run.doc["final"] = summary_json(trainer->log().back());
  run.doc["timings"]["epoch_seconds"] = epoch_seconds;
  run.outputs = {"checkpoint/", "train_log.csv"};
  run.write(dir);
  out << "checkpoint written to " << (dir / "checkpoint").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string data, out, checkpoint;
  std::string part = "test";
};

int cmd_eval(const EvalArgs &a, std::ostream &out) {
  Manifest run("eval");
  const Trainer trainer = Trainer::load_checkpoint(a.checkpoint);
  const FeatureSet data = load_featureset(a.data);
  const SyncTvaModel &model = trainer.model();
  if (data.class_count() != model.classes())
    throw DataError(DataError::Kind::DimMismatch,
                    "checkpoint was trained with C=" + std::to_string(model.classes()) +
                      " classes but the dataset has C=" + std::to_string(data.class_count()));
  if (!(data.dims == model.dims()))
    throw DataError(DataError::Kind::DimMismatch,
                    "checkpoint feature dims differ from the dataset's");
  const ModelConfig &cfg = model.config();
  std::optional<DatasetSplit> parts;
  if (a.part != "all")
    parts.emplace(partition(data, cfg));
  const FeatureSet &target = parts ? pick_part(*parts, a.part) : data;
  if (target.conversations.empty())
    throw ConfigError("the '" + a.part + "' part of this dataset is empty");

  const Evaluation ev = evaluate(model, target, true);
  const fs::path dir(a.out);
  ensure_dir(dir);
  write_confusion_csv(dir / "confusion.csv", ev.report.confusion, data.class_names);
  write_per_class_csv(dir / "per_class.csv", ev.report, data.class_names);
  write_metrics_json(dir / "metrics.json", ev.report, ev.loss);
  write_projection_csv(dir / "projection.csv", project_2d(ev.fused), ev.labels);
  write_projection_csv(dir / "projection_raw.csv", project_2d(ev.raw), ev.labels);

  run.doc["config"] = config_to_json(cfg);
  run.doc["seed"] = cfg.seed;
  run.doc["checkpoint"] = fs::absolute(a.checkpoint).string();
  run.doc["dataset"] = fs::absolute(a.data).string();
  run.doc["dataset_fingerprint"] = dataset_fingerprint(a.data);
  run.doc["part"] = a.part;
  run.doc["output_dir"] = dir.string();
  run.outputs = {"confusion.csv", "per_class.csv", "metrics.json", "projection.csv",
                 "projection_raw.csv"};
  run.write(dir);
  out << "accuracy " << format_number(ev.report.accuracy) << " weighted_f1 "
      << format_number(ev.report.weighted_f1) << " on " << ev.labels.size() << " utterances\n";
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string data, out;
  std::string variants = "full,A1,A2,A3,B1,B2,B3,C1,C2,D1";
  std::size_t seeds = 3;
  std::string part = "test";
  ConfigFlags flags;
};

int cmd_ablate(const AblateArgs &a, std::ostream &out) {
  Manifest run("ablate");
  const ModelConfig base = a.flags.resolve();
  std::vector<std::string> tags;
  std::stringstream ss(a.variants);
  for (std::string t; std::getline(ss, t, ',');)
    if (!t.empty()) {
      ModelConfig probe;
      apply_ablation(probe, t); // validates the tag
      tags.push_back(t);
    }
  if (a.seeds == 0)
    throw ConfigError("--seeds must be positive");
  const FeatureSet data = load_featureset(a.data);
  const DatasetSplit parts = partition(data, base);
  if (pick_part(parts, a.part).conversations.empty())
    throw ConfigError("the '" + a.part + "' part of this dataset is empty");

  AblationOptions opts;
  opts.seeds = a.seeds;
  opts.eval_split = a.part == "train" ? EvalSplit::Train
                    : a.part == "valid" ? EvalSplit::Valid
                                        : EvalSplit::Test;
  ordered_json runs = ordered_json::array();
  opts.on_run = [&](const std::string &tag, std::uint64_t seed, const Evaluation &ev) {
    out << tag << " seed " << seed << " wf1 " << format_number(ev.report.weighted_f1) << " acc "
        << format_number(ev.report.accuracy) << '\n';
    runs.push_back({{"variant", tag},
                    {"seed", seed},
                    {"wf1", ev.report.weighted_f1},
                    {"accuracy", ev.report.accuracy}});
  };
  const auto rows = run_ablation_grid(parts, base, tags, opts);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_ablation_csv(dir / "ablation.csv", rows);
  run.doc["config"] = config_to_json(base);
  run.doc["seed"] = base.seed;
  run.doc["seeds"] = a.seeds;
  run.doc["part"] = a.part;
  run.doc["dataset"] = fs::absolute(a.data).string();
  run.doc["dataset_fingerprint"] = dataset_fingerprint(a.data);
  run.doc["output_dir"] = dir.string();
  run.doc["runs"] = runs;
  run.outputs = {"ablation.csv"};
  run.write(dir);
  out << "ablation table written to " << (dir / "ablation.csv").string() << '\n';
  return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Cross-modal graph fusion for emotion recognition in conversation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SynthArgs sa;
  auto *synth = app.add_subcommand("synth", "Generate a synthetic feature dataset");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--seed", sa.seed, "Generator seed");
  synth->add_option("--classes", sa.classes, "Number of classes (>= 2)");
  synth->add_option("--conversations", sa.conversations, "Number of conversations");
  synth->add_option("--min-utt", sa.min_utt, "Minimum utterances per conversation");
  synth->add_option("--max-utt", sa.max_utt, "Maximum utterances per conversation");
  synth->add_option("--dim", sa.dim, "Feature width of every modality");
  synth->add_option("--spread", sa.spread, "Cluster standard deviation");

  TrainArgs ta;
  auto *train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", ta.data, "Dataset manifest or directory")->required();
  train->add_option("--out", ta.out, "Output directory")->required();
  train->add_option("--resume", ta.resume, "Checkpoint directory to continue from");
  train->add_option("--stop-after", ta.stop_after, "Stop after this epoch (0: run to the end)");
  train->add_flag("--quiet", ta.quiet, "Suppress per-epoch lines");
  ta.flags.attach(*train);

  EvalArgs ea;
  auto *eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--data", ea.data, "Dataset manifest or directory")->required();
  eval->add_option("--out", ea.out, "Output directory")->required();
  eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory")->required();
  eval->add_option("--part", ea.part, "train, valid, test or all")
    ->check(CLI::IsMember({"train", "valid", "test", "all"}));
  std::string eval_seed_unused, eval_config_unused;
  eval->add_option("--seed", eval_seed_unused, "Ignored; the checkpoint fixes the seed");
  eval->add_option("--config", eval_config_unused, "Ignored; the checkpoint holds the config");

  AblateArgs aa;
  auto *ablate = app.add_subcommand("ablate", "Run the ablation grid");
  ablate->add_option("--data", aa.data, "Dataset manifest or directory")->required();
  ablate->add_option("--out", aa.out, "Output directory")->required();
  ablate->add_option("--variants", aa.variants, "Comma-separated ablation tags");
  ablate->add_option("--seeds", aa.seeds, "Seeds per variant");
  ablate->add_option("--part", aa.part, "Split part to score: train, valid or test")
    ->check(CLI::IsMember({"train", "valid", "test"}));
  aa.flags.attach(*ablate);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed())
      return cmd_synth(sa, out);
    if (train->parsed())
      return cmd_train(ta, out);
    if (eval->parsed())
      return cmd_eval(ea, out);
    return cmd_ablate(aa, out);
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError &e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError &e) {
    err << "numeric error in op '" << e.op() << "': " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError &e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError &e) {
    err << "dimension error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run_cli(int argc, const char *const *argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

} // namespace synctva
