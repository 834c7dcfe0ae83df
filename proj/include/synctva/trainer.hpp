// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trainer.hpp
 * @brief  Training loop, evaluation, checkpoints and the ablation grid.
 *
 * A batch is a list of whole conversations. Each conversation is its own
 * graph, so there is no padding; the batch loss is the utterance-weighted
 * mean cross-entropy over the batch. All randomness (shuffling, dropout) is
 * derived from (seed, epoch, conversation index), which is why a checkpoint
 * only needs the epoch counter to resume on the exact same trajectory.
 */
#pragma once

#include <synctva/config.hpp>
#include <synctva/metrics.hpp>
#include <synctva/model.hpp>
#include <synctva/optim.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace synctva {

struct EpochLog {
  std::size_t epoch = 0; // 1-based
  double lr = 0.0;
  double step_loss = 0.0; // mean training loss with dropout, as optimized
  double grad_norm = 0.0; // largest pre-clip norm seen this epoch
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double train_wf1 = 0.0;
  double valid_loss = 0.0; // NaN when the valid split is empty
  double valid_accuracy = 0.0;
  double valid_wf1 = 0.0;

  friend bool operator==(const EpochLog &, const EpochLog &) = default;
};

void write_epoch_log_csv(const std::filesystem::path &path, const std::vector<EpochLog> &log);

struct Evaluation {
  std::vector<int> labels;
  std::vector<int> predictions;
  double loss = 0.0;
  MetricsReport report;
  Matrix fused; // z rows, filled when requested
  Matrix raw;   // concatenated [text, audio, visual] input rows, when requested
};

/// Eval-mode pass (no dropout, no tape). Ties in argmax go to the lower class.
Evaluation evaluate(const SyncTvaModel &model, const FeatureSet &fs, bool keep_features = false);

/// The conversation-level split a config asks for (see train_on_all).
DatasetSplit partition(const FeatureSet &fs, const ModelConfig &cfg);

class Trainer {
public:
  Trainer(ModelConfig cfg, ModalityDims dims, std::vector<std::string> class_names);
  Trainer(Trainer &&) = default;
  Trainer &operator=(Trainer &&) = default;
  Trainer(const Trainer &) = delete;
  Trainer &operator=(const Trainer &) = delete;

  /// One optimizer step on `batch`; returns the batch loss before the update.
  double train_step(const std::vector<const Conversation *> &batch, double lr,
                    const std::vector<Rng> &dropout_rngs, double *grad_norm = nullptr);

  /// Trains one epoch on `train` and evaluates both splits.
  const EpochLog &run_epoch(const FeatureSet &train, const FeatureSet &valid);

  /// Runs epochs until cfg.epochs, early stop, or `until_epoch` (if nonzero)
  /// is reached.
  void fit(const FeatureSet &train, const FeatureSet &valid, std::size_t until_epoch = 0,
           const std::function<void(const EpochLog &)> &on_epoch = {});

  /// Changes the epoch budget, e.g. to extend a resumed run. Rejected under a
  /// cosine schedule, whose learning rates depend on the budget.
  void set_epoch_budget(std::size_t epochs);

  bool finished() const { return stopped_ || epoch_ >= model_.config().epochs; }
  bool stopped_early() const { return stopped_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<EpochLog> &log() const { return log_; }
  const SyncTvaModel &model() const { return model_; }
  SyncTvaModel &model() { return model_; }
  const AdamW &optimizer() const { return opt_; }
  const std::vector<std::string> &class_names() const { return class_names_; }

  /// Writes `dir/checkpoint.json` plus params/ and moments/ blobs.
  void save_checkpoint(const std::filesystem::path &dir) const;
  static Trainer load_checkpoint(const std::filesystem::path &dir);

private:
  SyncTvaModel model_;
  AdamW opt_;
  std::vector<std::string> class_names_;
  std::vector<EpochLog> log_;
  std::size_t epoch_ = 0;
  bool stopped_ = false;
};

struct AblationRow {
  std::string tag;
  std::string description;
  std::size_t parameters = 0;
  std::vector<double> wf1; // per seed, fraction
  std::vector<double> acc;
  double mean_wf1 = 0.0;
  double mean_acc = 0.0;
  double delta_wf1 = 0.0; // vs the full row
  double delta_acc = 0.0;
  std::optional<TTestResult> ttest; // full vs this row on WF1; empty with one seed
};

enum class EvalSplit { Train, Valid, Test };

struct AblationOptions {
  std::size_t seeds = 3;
  EvalSplit eval_split = EvalSplit::Test;
  std::function<void(const std::string &tag, std::uint64_t seed, const Evaluation &)> on_run;
};

/// Trains every tag with seeds base.seed, base.seed + 1, ... on the same
/// split. "full" is always computed and placed first.
std::vector<AblationRow> run_ablation_grid(const DatasetSplit &data, const ModelConfig &base,
                                           std::vector<std::string> tags,
                                           const AblationOptions &options = {});

/// variant, description, parameters, wf1, acc, delta_wf1, delta_acc (percent),
/// then t, p, significant ("n/a" with fewer than two seeds).
void write_ablation_csv(const std::filesystem::path &path, const std::vector<AblationRow> &rows);

} // namespace synctva
