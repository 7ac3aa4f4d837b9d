// Copyright 2026 The gtrel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gtrel/graph/instance.hpp"
#include "gtrel/model.hpp"
#include "gtrel/numerics/grad_check.hpp"

namespace gtrel {

/// Tags for derived seeds; every random stream is derive_seed(seed, {tag, ...}).
enum SeedStream : std::uint64_t {
  kInitStream = 1,
  kShuffleStream = 2,
  kDropoutStream = 3,
  kFoldStream = 4,
  kValidationStream = 5,
  kPartitionStream = 6,
  kSweepStream = 7,
  kSynthStream = 8,
};

struct TrainSpec {
  std::uint64_t seed = 1;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double warmup_fraction = 0.05;
  /// Held out of the training pool by kfold and sigtest; unset means
  /// min(200, 10% of the pool).
  std::optional<std::size_t> validation_size;
  /// Stop once eval-mode train accuracy reaches this value.
  std::optional<double> target_train_accuracy;

  void validate() const;
  std::size_t validation_count(std::size_t pool) const;
};

/// Learning rate for optimizer step `step` (0-based): linear warmup, then
/// constant.
double learning_rate_at(const TrainSpec& spec, std::size_t step, std::size_t total_steps);

/// Adaptive moment estimation over a ModelParams-shaped state.
class Adam {
 public:
  Adam(const ModelParams& like, double beta1, double beta2, double epsilon);
  void step(ModelParams& params, const ModelParams& grads, double learning_rate);
  std::size_t steps() const noexcept { return t_; }

 private:
  ModelParams m_, v_;
  double beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;  // cumulative optimizer steps
  double learning_rate = 0.0;
  double batch_loss = 0.0;  // mean of the train-mode minibatch losses
  double train_loss = 0.0;  // eval mode, full training set
  double train_accuracy = 0.0;
  double validation_loss = 0.0;  // NaN without a validation set
  double validation_accuracy = 0.0;
};

void write_curve_csv(std::ostream& out, std::span<const EpochRecord> curve);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> curve;
  std::size_t epochs_run = 0;
  /// Epoch whose parameters were kept (best validation accuracy, else last).
  std::size_t selected_epoch = 0;
  bool reached_target = false;
  /// Set when a minibatch loss was not finite; the checkpoint then holds the
  /// last parameters that produced a finite loss.
  bool diverged = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Expands entities, builds the vocabulary from `train_set`, and trains from
/// a seeded initialization (or from `initial` when given).
TrainResult train(std::span<const RelationInstance> train_set, const TrainSpec& spec, ModelConfig cfg,
                  std::span<const RelationInstance> validation = {}, const ModelParams* initial = nullptr,
                  const EpochCallback& on_epoch = {});

struct ClassMetrics {
  std::string label;
  std::size_t support = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct Metrics {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  /// Two-label sets only; the first label is the positive class.
  bool binary = false;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

Metrics compute_metrics(std::span<const std::string> gold, std::span<const std::string> predicted,
                        std::span<const std::string> label_set);

struct Prediction {
  std::string id;
  std::string gold;
  std::string predicted;
  std::vector<double> probabilities;
  bool single_sentence = true;
  std::size_t expansions = 1;
};

struct EvalReport {
  Metrics all;
  Metrics single;
  std::vector<Prediction> predictions;
};

/// Scores every instance; multi-ID instances are expanded and their
/// expansions combined by elementwise max probability (renormalized).
/// Throws Error(kConfig) when `task` is given and its label set differs from
/// the checkpoint's, Error(kLabel) for a gold label outside it.
EvalReport evaluate(const Checkpoint& ckpt, std::span<const RelationInstance> dataset,
                    std::optional<Task> task = std::nullopt);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const EvalReport& report);
void write_predictions_jsonl(std::ostream& out, std::span<const Prediction> predictions);

/// k disjoint index sets covering [0, n), sizes differing by at most one,
/// from a seeded shuffle.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, std::size_t k, std::uint64_t seed);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one value
};
Summary summarize(std::span<const double> values);

struct FoldResult {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::size_t epochs_run = 0;
  EvalReport report;
};

struct KFoldReport {
  std::vector<FoldResult> folds;
  Summary accuracy, single_accuracy, precision, recall, f1;
};

/// Fold i trains on the other folds minus a validation draw seeded by
/// derive_seed(seed, {kValidationStream, i}).
KFoldReport kfold(std::span<const RelationInstance> dataset, std::size_t k, const TrainSpec& spec,
                  const ModelConfig& cfg, const EpochCallback& on_epoch = {});
nlohmann::json to_json(const KFoldReport& report);

struct TTestResult {
  std::size_t n = 0;
  double mean = 0.0;  // of a − b
  double std = 0.0;
  double t = 0.0;
  double p = 1.0;  // two-sided
  /// All differences equal, so the statistic is undefined; p is 1.0 for a
  /// zero mean and 0.0 otherwise.
  bool degenerate = false;
};

/// Paired two-sided t-test with n − 1 degrees of freedom.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct SignificanceReport {
  std::string metric;  // "f1" for two-label sets, else "accuracy"
  std::vector<double> scores_a, scores_b;
  TTestResult test;
};

/// Both configs are trained and evaluated on the same partitions; partition
/// j shuffles with derive_seed(seed, {kPartitionStream, j}).
SignificanceReport significance_test(std::span<const RelationInstance> dataset, const ModelConfig& cfg_a,
                                     const ModelConfig& cfg_b, std::size_t partitions, std::size_t train_size,
                                     std::size_t test_size, const TrainSpec& spec);
nlohmann::json to_json(const SignificanceReport& report);

struct SweepRow {
  std::optional<std::size_t> cap;  // nullopt is the uncapped run
  std::size_t max_set_size = 0;    // over the test set
  Metrics metrics;
};

/// Retrains once per cap with the same seed and scores on `test_set`.
std::vector<SweepRow> sweep_neighbor_cap(std::span<const RelationInstance> train_set,
                                         std::span<const RelationInstance> test_set,
                                         std::span<const std::optional<std::size_t>> caps, const TrainSpec& spec,
                                         const ModelConfig& cfg);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

struct SyntheticSpec {
  std::size_t min_sentences = 2;
  std::size_t max_sentences = 3;
  std::size_t min_tokens = 10;
  std::size_t max_tokens = 30;
  std::size_t filler_words = 40;
  std::string trigger = "inhibits";
};

/// Two single-token entities (DRUG, MUTATION) and exactly one trigger token
/// per instance; the label is "yes" iff the trigger lies on the dependency
/// shortest path between the entities. Negatives keep the trigger outside
/// the two-hop neighborhood of both entities. Labels alternate yes/no.
std::vector<RelationInstance> generate_synthetic(std::size_t n, std::uint64_t seed, const SyntheticSpec& spec = {});

/// Model config matching generate_synthetic output.
ModelConfig synthetic_model_config();

struct ModelGradCheck {
  GradCheckReport report;
  std::vector<std::string> tensor_names;
};

/// Central-difference check of the full model on one random instance of
/// `tokens` tokens with one single-token mention per entity slot. Weights are
/// drawn uniformly from ±0.5 so attention is far from uniform.
ModelGradCheck model_grad_check(ModelConfig cfg, std::uint64_t seed, std::size_t tokens, double step);

}  // namespace gtrel
