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


#include "gtrel/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "gtrel/error.hpp"
#include "gtrel/graph/dependency.hpp"
#include "gtrel/graph/neighbors.hpp"
#include "gtrel/numerics/ops.hpp"
#include "gtrel/numerics/rng.hpp"

namespace gtrel {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<RelationInstance> expand_all(std::span<const RelationInstance> data) {
  std::vector<RelationInstance> out;
  for (const RelationInstance& inst : data) {
    auto expanded = expand_entities(inst);
    for (auto& e : expanded) out.push_back(std::move(e));
  }
  return out;
}

std::vector<RelationInstance> pick(std::span<const RelationInstance> data, std::span<const std::size_t> indices) {
  std::vector<RelationInstance> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(data[i]);
  return out;
}

bool finite_params(const ModelParams& p) {
  bool ok = true;
  p.for_each([&](const std::string&, const Tensor& t) { ok = ok && t.all_finite(); });
  return ok;
}

// Eval-mode mean loss and accuracy.
std::pair<double, double> score(const ModelParams& params, std::span<const PreparedInstance> data,
                                const ModelConfig& cfg) {
  if (data.empty()) return {kNaN, kNaN};
  double loss = 0.0;
  std::size_t correct = 0;
  for (const PreparedInstance& inst : data) {
    const Tensor logits = forward(params, inst, cfg);
    const std::vector<double> p = softmax(logits.values());
    loss -= std::log(p[inst.gold]);
    correct += argmax(p) == inst.gold;
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainSpec::validate() const {
  if (epochs == 0) fail(ErrorKind::kConfig, "epochs must be at least 1");
  if (batch_size == 0) fail(ErrorKind::kConfig, "batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::kConfig, "learning_rate must be finite and non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::kConfig, "Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) fail(ErrorKind::kConfig, "adam_epsilon must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    fail(ErrorKind::kConfig, "warmup_fraction must lie in [0, 1]");
  }
  if (target_train_accuracy && !(*target_train_accuracy > 0.0 && *target_train_accuracy <= 1.0)) {
    fail(ErrorKind::kConfig, "target_train_accuracy must lie in (0, 1]");
  }
}

std::size_t TrainSpec::validation_count(std::size_t pool) const {
  return validation_size.value_or(std::min<std::size_t>(200, pool / 10));
}

double learning_rate_at(const TrainSpec& spec, std::size_t step, std::size_t total_steps) {
  const auto warmup = static_cast<std::size_t>(std::ceil(spec.warmup_fraction * static_cast<double>(total_steps)));
  if (warmup == 0 || step >= warmup) return spec.learning_rate;
  return spec.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
}

Adam::Adam(const ModelParams& like, double beta1, double beta2, double epsilon)
    : m_(zeros_like(like)), v_(zeros_like(like)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::step(ModelParams& params, const ModelParams& grads, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::vector<Tensor*> p, m, v;
  std::vector<const Tensor*> g;
  params.for_each([&](const std::string&, Tensor& t) { p.push_back(&t); });
  m_.for_each([&](const std::string&, Tensor& t) { m.push_back(&t); });
  v_.for_each([&](const std::string&, Tensor& t) { v.push_back(&t); });
  grads.for_each([&](const std::string&, const Tensor& t) { g.push_back(&t); });
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (g[k]->shape() != p[k]->shape()) fail(ErrorKind::kShape, "Adam: gradient shape mismatch");
    for (std::size_t i = 0; i < p[k]->size(); ++i) {
      const double gi = (*g[k])[i];
      double& mi = (*m[k])[i];
      double& vi = (*v[k])[i];
      mi = beta1_ * mi + (1.0 - beta1_) * gi;
      vi = beta2_ * vi + (1.0 - beta2_) * gi * gi;
      (*p[k])[i] -= learning_rate * (mi / c1) / (std::sqrt(vi / c2) + epsilon_);
    }
  }
}

void write_curve_csv(std::ostream& out, std::span<const EpochRecord> curve) {
  out << "epoch,steps,learning_rate,batch_loss,train_loss,train_accuracy,validation_loss,validation_accuracy\n";
  for (const EpochRecord& r : curve) {
    out << r.epoch << ',' << r.steps << ',' << format_double(r.learning_rate) << ',' << format_double(r.batch_loss)
        << ',' << format_double(r.train_loss) << ',' << format_double(r.train_accuracy) << ','
        << format_double(r.validation_loss) << ',' << format_double(r.validation_accuracy) << '\n';
  }
}

TrainResult train(std::span<const RelationInstance> train_set, const TrainSpec& spec, ModelConfig cfg,
                  std::span<const RelationInstance> validation, const ModelParams* initial,
                  const EpochCallback& on_epoch) {
  spec.validate();
  if (train_set.empty()) fail(ErrorKind::kConfig, "training set is empty");
  const std::vector<RelationInstance> expanded = expand_all(train_set);
  Vocabulary vocab = Vocabulary::build(expanded);
  cfg.encoder.vocab_size = vocab.size();
  cfg.validate();
  const std::vector<PreparedInstance> data = prepare_all(expanded, cfg, vocab);
  const std::vector<RelationInstance> val_expanded = expand_all(validation);
  const std::vector<PreparedInstance> val = prepare_all(val_expanded, cfg, vocab);

  ModelParams params = initial ? *initial : init_model(cfg, derive_seed(spec.seed, {kInitStream}));
  if (initial) {
    const ModelParams shape = init_model(cfg, 0);
    std::vector<Shape> want, have;
    shape.for_each([&](const std::string&, const Tensor& t) { want.push_back(t.shape()); });
    params.for_each([&](const std::string&, const Tensor& t) { have.push_back(t.shape()); });
    if (want != have) fail(ErrorKind::kShape, "initial parameters do not match the model config");
  }
  Adam adam(params, spec.beta1, spec.beta2, spec.adam_epsilon);

  const std::size_t per_epoch = (data.size() + spec.batch_size - 1) / spec.batch_size;
  const std::size_t total = per_epoch * spec.epochs;
  TrainResult result;
  ModelParams last_good = params;
  ModelParams best;
  double best_val = -1.0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= spec.epochs && !result.diverged; ++epoch) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng(derive_seed(spec.seed, {kShuffleStream, epoch})).shuffle(order);

    double loss_sum = 0.0;
    double lr = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      std::vector<const PreparedInstance*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + spec.batch_size); ++k) {
        batch.push_back(&data[order[k]]);
      }
      const LossAndGrads lg = loss_and_grads(batch, params, cfg, derive_seed(spec.seed, {kDropoutStream, step}));
      if (!std::isfinite(lg.loss) || !finite_params(lg.grads)) {
        result.diverged = true;
        params = last_good;
        break;
      }
      last_good = params;
      lr = learning_rate_at(spec, step, total);
      adam.step(params, lg.grads, lr);
      loss_sum += lg.loss;
      ++batches;
      ++step;
    }
    if (result.diverged) break;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = step;
    rec.learning_rate = lr;
    rec.batch_loss = loss_sum / static_cast<double>(batches);
    std::tie(rec.train_loss, rec.train_accuracy) = score(params, data, cfg);
    std::tie(rec.validation_loss, rec.validation_accuracy) = score(params, val, cfg);
    result.curve.push_back(rec);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(rec);

    if (!val.empty() && rec.validation_accuracy > best_val) {
      best_val = rec.validation_accuracy;
      best = params;
      result.selected_epoch = epoch;
    }
    if (spec.target_train_accuracy && rec.train_accuracy >= *spec.target_train_accuracy) {
      result.reached_target = true;
      break;
    }
  }

  if (result.diverged || val.empty() || result.selected_epoch == 0) {
    result.selected_epoch = result.epochs_run;
  } else {
    params = std::move(best);
  }
  result.checkpoint = {std::move(cfg), std::move(vocab), std::move(params)};
  return result;
}

Metrics compute_metrics(std::span<const std::string> gold, std::span<const std::string> predicted,
                        std::span<const std::string> label_set) {
  if (gold.size() != predicted.size()) fail(ErrorKind::kShape, "gold and predicted label counts differ");
  auto index_of = [&](const std::string& label) {
    auto it = std::find(label_set.begin(), label_set.end(), label);
    if (it == label_set.end()) fail(ErrorKind::kLabel, "label '" + label + "' is not in the label set");
    return static_cast<std::size_t>(it - label_set.begin());
  };
  Metrics m;
  m.total = gold.size();
  for (const std::string& label : label_set) m.per_class.push_back({label, 0, 0, 0.0});
  m.binary = label_set.size() == 2;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const std::size_t g = index_of(gold[i]);
    const std::size_t p = index_of(predicted[i]);
    ++m.per_class[g].support;
    if (g == p) {
      ++m.correct;
      ++m.per_class[g].correct;
    }
    if (m.binary) {
      if (g == 0 && p == 0) ++m.tp;
      else if (g != 0 && p == 0) ++m.fp;
      else if (g == 0 && p != 0) ++m.fn;
      else ++m.tn;
    }
  }
  m.accuracy = safe_ratio(static_cast<double>(m.correct), static_cast<double>(m.total));
  for (ClassMetrics& c : m.per_class) c.accuracy = safe_ratio(static_cast<double>(c.correct), static_cast<double>(c.support));
  if (m.binary) {
    m.precision = safe_ratio(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fp));
    m.recall = safe_ratio(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fn));
    m.f1 = safe_ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  }
  return m;
}

EvalReport evaluate(const Checkpoint& ckpt, std::span<const RelationInstance> dataset, std::optional<Task> task) {
  const ModelConfig& cfg = ckpt.config;
  if (task && task_labels(*task) != cfg.label_set) {
    fail(ErrorKind::kConfig, "task " + std::string(to_string(*task)) + " labels do not match the checkpoint label set");
  }
  EvalReport report;
  std::vector<std::string> gold, pred, single_gold, single_pred;
  for (const RelationInstance& inst : dataset) {
    Prediction p;
    p.id = inst.id;
    p.gold = inst.label;
    p.probabilities.assign(cfg.label_set.size(), 0.0);
    const auto expansions = expand_entities(inst);
    p.expansions = expansions.size();
    for (const RelationInstance& e : expansions) {
      const PreparedInstance prepared = prepare(e, cfg, ckpt.vocab);
      p.single_sentence = prepared.single_sentence;
      const std::vector<double> q = softmax(forward(ckpt.params, prepared, cfg).values());
      for (std::size_t k = 0; k < q.size(); ++k) p.probabilities[k] = std::max(p.probabilities[k], q[k]);
    }
    const double z = std::accumulate(p.probabilities.begin(), p.probabilities.end(), 0.0);
    for (double& v : p.probabilities) v /= z;
    p.predicted = cfg.label_set[argmax(p.probabilities)];
    gold.push_back(p.gold);
    pred.push_back(p.predicted);
    if (p.single_sentence) {
      single_gold.push_back(p.gold);
      single_pred.push_back(p.predicted);
    }
    report.predictions.push_back(std::move(p));
  }
  report.all = compute_metrics(gold, pred, cfg.label_set);
  report.single = compute_metrics(single_gold, single_pred, cfg.label_set);
  return report;
}

json to_json(const Metrics& m) {
  json per_class = json::array();
  for (const ClassMetrics& c : m.per_class) {
    per_class.push_back({{"label", c.label}, {"support", c.support}, {"correct", c.correct}, {"accuracy", c.accuracy}});
  }
  json out = {{"total", m.total}, {"correct", m.correct}, {"accuracy", m.accuracy}, {"per_class", per_class}};
  if (m.binary) {
    out["tp"] = m.tp;
    out["fp"] = m.fp;
    out["fn"] = m.fn;
    out["tn"] = m.tn;
    out["precision"] = m.precision;
    out["recall"] = m.recall;
    out["f1"] = m.f1;
  }
  return out;
}

json to_json(const EvalReport& report) { return {{"all", to_json(report.all)}, {"single", to_json(report.single)}}; }

void write_predictions_jsonl(std::ostream& out, std::span<const Prediction> predictions) {
  for (const Prediction& p : predictions) {
    out << json{{"id", p.id},
                {"gold", p.gold},
                {"predicted", p.predicted},
                {"probabilities", p.probabilities},
                {"single_sentence", p.single_sentence},
                {"expansions", p.expansions}}
               .dump()
        << '\n';
  }
}

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::kConfig, "k must be at least 2");
  if (n < k) fail(ErrorKind::kConfig, "dataset of " + std::to_string(n) + " cannot fill " + std::to_string(k) + " folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng(seed).shuffle(order);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
    s.mean = values[0];
    return s;
  }
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

KFoldReport kfold(std::span<const RelationInstance> dataset, std::size_t k, const TrainSpec& spec,
                  const ModelConfig& cfg, const EpochCallback& on_epoch) {
  spec.validate();
  const auto folds = fold_partition(dataset.size(), k, derive_seed(spec.seed, {kFoldStream}));
  KFoldReport report;
  std::vector<double> acc, single_acc, prec, rec, f1;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) pool.insert(pool.end(), folds[j].begin(), folds[j].end());
    std::sort(pool.begin(), pool.end());
    const std::size_t vcount = spec.validation_count(pool.size());
    if (vcount >= pool.size()) {
      fail(ErrorKind::kConfig, "fold " + std::to_string(i) + " has " + std::to_string(pool.size()) +
                                   " training instances, too few for a validation set of " + std::to_string(vcount));
    }
    std::vector<std::size_t> shuffled = pool;
    CounterRng(derive_seed(spec.seed, {kValidationStream, i})).shuffle(shuffled);
    std::vector<std::size_t> val_idx(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(vcount));
    std::vector<std::size_t> train_idx(shuffled.begin() + static_cast<std::ptrdiff_t>(vcount), shuffled.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    TrainSpec fold_spec = spec;
    fold_spec.seed = derive_seed(spec.seed, {kFoldStream, i + 1});
    const auto train_data = pick(dataset, train_idx);
    const auto val_data = pick(dataset, val_idx);
    const auto test_data = pick(dataset, folds[i]);
    const TrainResult trained = train(train_data, fold_spec, cfg, val_data, nullptr, on_epoch);

    FoldResult fr;
    fr.fold = i;
    fr.train_size = train_idx.size();
    fr.validation_size = val_idx.size();
    fr.test_size = folds[i].size();
    fr.epochs_run = trained.epochs_run;
    fr.report = evaluate(trained.checkpoint, test_data);
    acc.push_back(fr.report.all.accuracy);
    single_acc.push_back(fr.report.single.accuracy);
    prec.push_back(fr.report.all.precision);
    rec.push_back(fr.report.all.recall);
    f1.push_back(fr.report.all.f1);
    report.folds.push_back(std::move(fr));
  }
  report.accuracy = summarize(acc);
  report.single_accuracy = summarize(single_acc);
  report.precision = summarize(prec);
  report.recall = summarize(rec);
  report.f1 = summarize(f1);
  return report;
}

json to_json(const KFoldReport& report) {
  auto sum = [](const Summary& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
  json folds = json::array();
  for (const FoldResult& f : report.folds) {
    folds.push_back({{"fold", f.fold},
                     {"train_size", f.train_size},
                     {"validation_size", f.validation_size},
                     {"test_size", f.test_size},
                     {"epochs_run", f.epochs_run},
                     {"metrics", to_json(f.report)}});
  }
  return {{"folds", folds},
          {"accuracy", sum(report.accuracy)},
          {"single_accuracy", sum(report.single_accuracy)},
          {"precision", sum(report.precision)},
          {"recall", sum(report.recall)},
          {"f1", sum(report.f1)}};
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::kShape, "paired t-test needs equally many scores");
  if (a.size() < 2) fail(ErrorKind::kConfig, "paired t-test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const Summary s = summarize(d);
  TTestResult r;
  r.n = d.size();
  r.mean = s.mean;
  r.std = s.std;
  if (std::all_of(d.begin(), d.end(), [&](double v) { return v == d[0]; })) {
    r.degenerate = true;
    r.std = 0.0;
    r.t = d[0] == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), d[0]);
    r.p = d[0] == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = s.mean / (s.std / std::sqrt(static_cast<double>(r.n)));
  const boost::math::students_t dist(static_cast<double>(r.n - 1));
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

SignificanceReport significance_test(std::span<const RelationInstance> dataset, const ModelConfig& cfg_a,
                                     const ModelConfig& cfg_b, std::size_t partitions, std::size_t train_size,
                                     std::size_t test_size, const TrainSpec& spec) {
  if (partitions < 2) fail(ErrorKind::kConfig, "significance test needs at least 2 partitions");
  if (train_size == 0 || test_size == 0 || train_size + test_size > dataset.size()) {
    fail(ErrorKind::kConfig, "train_size + test_size must be positive and fit the dataset");
  }
  if (cfg_a.label_set != cfg_b.label_set) fail(ErrorKind::kConfig, "compared configs use different label sets");
  spec.validate();
  SignificanceReport report;
  report.metric = cfg_a.label_set.size() == 2 ? "f1" : "accuracy";
  for (std::size_t j = 0; j < partitions; ++j) {
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng(derive_seed(spec.seed, {kPartitionStream, j})).shuffle(order);
    const std::size_t vcount = spec.validation_count(train_size);
    if (vcount >= train_size) fail(ErrorKind::kConfig, "validation set would consume the training partition");
    auto slice = [&](std::size_t from, std::size_t to) {
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(from),
                                   order.begin() + static_cast<std::ptrdiff_t>(to));
      std::sort(idx.begin(), idx.end());
      return pick(dataset, idx);
    };
    const auto val_data = slice(0, vcount);
    const auto train_data = slice(vcount, train_size);
    const auto test_data = slice(train_size, train_size + test_size);
    TrainSpec part_spec = spec;
    part_spec.seed = derive_seed(spec.seed, {kPartitionStream, j, 1});
    for (int side = 0; side < 2; ++side) {
      const TrainResult trained = train(train_data, part_spec, side == 0 ? cfg_a : cfg_b, val_data);
      const EvalReport r = evaluate(trained.checkpoint, test_data);
      (side == 0 ? report.scores_a : report.scores_b).push_back(report.metric == "f1" ? r.all.f1 : r.all.accuracy);
    }
  }
  report.test = paired_t_test(report.scores_a, report.scores_b);
  return report;
}

json to_json(const SignificanceReport& report) {
  const TTestResult& t = report.test;
  return {{"metric", report.metric},
          {"scores_a", report.scores_a},
          {"scores_b", report.scores_b},
          {"n", t.n},
          {"mean_difference", t.mean},
          {"std_difference", t.std},
          {"t", std::isfinite(t.t) ? json(t.t) : json(t.t > 0 ? "inf" : "-inf")},
          {"p", t.p},
          {"degenerate", t.degenerate}};
}

std::vector<SweepRow> sweep_neighbor_cap(std::span<const RelationInstance> train_set,
                                         std::span<const RelationInstance> test_set,
                                         std::span<const std::optional<std::size_t>> caps, const TrainSpec& spec,
                                         const ModelConfig& cfg) {
  const std::vector<RelationInstance> test_expanded = expand_all(test_set);
  std::vector<SweepRow> rows;
  for (const auto& cap : caps) {
    if (cap && *cap == 0) fail(ErrorKind::kConfig, "neighbor caps must be positive");
    ModelConfig run_cfg = cfg;
    run_cfg.neighbor_cap = cap;
    SweepRow row;
    row.cap = cap;
    for (const RelationInstance& inst : test_expanded) {
      row.max_set_size = std::max(row.max_set_size, build_neighbors(inst, cap).max_set_size());
    }
    const TrainResult trained = train(train_set, spec, run_cfg);
    row.metrics = evaluate(trained.checkpoint, test_set).all;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "cap,max_set_size,accuracy,precision,recall,f1\n";
  for (const SweepRow& r : rows) {
    out << (r.cap ? std::to_string(*r.cap) : "none") << ',' << r.max_set_size << ',' << format_double(r.metrics.accuracy)
        << ',' << format_double(r.metrics.precision) << ',' << format_double(r.metrics.recall) << ','
        << format_double(r.metrics.f1) << '\n';
  }
}

std::vector<RelationInstance> generate_synthetic(std::size_t n, std::uint64_t seed, const SyntheticSpec& spec) {
  if (n < 2) fail(ErrorKind::kConfig, "synthetic datasets need at least 2 instances");
  if (spec.min_sentences == 0 || spec.max_sentences < spec.min_sentences || spec.max_tokens < spec.min_tokens ||
      spec.max_tokens < 3 * spec.max_sentences || spec.filler_words == 0) {
    fail(ErrorKind::kConfig, "inconsistent synthetic spec");
  }
  std::vector<RelationInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(derive_seed(seed, {kSynthStream, i}));
    const bool positive = i % 2 == 0;
    for (;;) {
      const auto sentences = static_cast<std::size_t>(
          rng.between(static_cast<std::int64_t>(spec.min_sentences), static_cast<std::int64_t>(spec.max_sentences)));
      const auto tokens = static_cast<std::size_t>(rng.between(
          static_cast<std::int64_t>(std::max(spec.min_tokens, 3 * sentences)), static_cast<std::int64_t>(spec.max_tokens)));
      std::vector<std::size_t> lengths(sentences, 3);
      for (std::size_t k = 3 * sentences; k < tokens; ++k) ++lengths[rng.below(sentences)];

      std::vector<std::size_t> heads(tokens);
      std::size_t offset = 0;
      for (std::size_t len : lengths) {
        std::vector<std::size_t> order(len);
        std::iota(order.begin(), order.end(), offset);
        rng.shuffle(order);
        heads[order[0]] = order[0];
        for (std::size_t k = 1; k < len; ++k) heads[order[k]] = order[rng.below(k)];
        offset += len;
      }

      const std::size_t drug = rng.below(tokens);
      const std::size_t mutation = rng.below(tokens);
      if (drug == mutation) continue;
      const std::vector<std::size_t> path = shortest_path(heads, drug, mutation);
      if (path.size() < 3) continue;

      RelationInstance inst;
      inst.id = "syn" + std::to_string(i);
      inst.task = Task::kNary2;
      for (std::size_t t = 0; t < tokens; ++t) {
        inst.tokens.push_back("w" + std::to_string(rng.below(spec.filler_words)));
        inst.dep.push_back({heads[t], heads[t] == t ? "root" : "dep"});
      }
      inst.tokens[drug] = "drug" + std::to_string(rng.below(8));
      inst.tokens[mutation] = "mut" + std::to_string(rng.below(8));
      inst.entities = {{"DRUG", {"D" + inst.tokens[drug].substr(4)}, {{drug, drug + 1}}, {}},
                       {"MUTATION", {"M" + inst.tokens[mutation].substr(3)}, {{mutation, mutation + 1}}, {}}};

      // Two-hop reach of the entity tokens under the neighbor rule.
      const NeighborGraph graph = build_neighbors(inst);
      std::set<std::size_t> reach{drug, mutation};
      for (int hop = 0; hop < 2; ++hop) {
        std::set<std::size_t> next = reach;
        for (std::size_t t : reach) next.insert(graph.neighbors[t].begin(), graph.neighbors[t].end());
        reach = std::move(next);
      }
      const std::vector<std::size_t> on_path(path.begin() + 1, path.end() - 1);
      std::vector<std::size_t> off_path;
      for (std::size_t t = 0; t < tokens; ++t)
        if (!reach.contains(t)) off_path.push_back(t);
      // Both placements must exist so the label carries no length or shape cue.
      if (off_path.empty()) continue;

      const auto& pool = positive ? on_path : off_path;
      inst.tokens[pool[rng.below(pool.size())]] = spec.trigger;
      inst.label = positive ? "yes" : "no";
      out.push_back(std::move(inst));
      break;
    }
  }
  return out;
}

ModelConfig synthetic_model_config() {
  ModelConfig cfg;
  cfg.label_set = task_labels(Task::kNary2);
  cfg.entity_slots = {"DRUG", "MUTATION"};
  cfg.encoder.max_len = 64;
  return cfg;
}

ModelGradCheck model_grad_check(ModelConfig cfg, std::uint64_t seed, std::size_t tokens, double step) {
  if (tokens < cfg.entity_slots.size()) fail(ErrorKind::kConfig, "too few tokens for one mention per entity slot");
  CounterRng rng(seed);
  RelationInstance inst;
  inst.id = "gradcheck";
  std::vector<std::size_t> order(tokens);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::size_t> heads(tokens);
  heads[order[0]] = order[0];
  for (std::size_t k = 1; k < tokens; ++k) heads[order[k]] = order[rng.below(k)];
  for (std::size_t t = 0; t < tokens; ++t) {
    inst.tokens.push_back("t" + std::to_string(rng.below(4)));
    inst.dep.push_back({heads[t], "dep"});
  }
  rng.shuffle(order);
  for (std::size_t e = 0; e < cfg.entity_slots.size(); ++e) {
    inst.entities.push_back({cfg.entity_slots[e], {"id" + std::to_string(e)}, {{order[e], order[e] + 1}}, {}});
  }
  inst.label = cfg.label_set[rng.below(cfg.label_set.size())];

  const Vocabulary vocab({"t0", "t1", "t2", "t3"});
  cfg.encoder.vocab_size = vocab.size();
  cfg.encoder.max_len = std::max(cfg.encoder.max_len, tokens + 1);
  const PreparedInstance prepared = prepare(inst, cfg, vocab);
  ModelParams params = init_model(cfg, seed);
  ModelGradCheck out;
  std::vector<Tensor*> leaves;
  std::map<const Tensor*, std::size_t> index;
  params.for_each([&](const std::string& name, Tensor& t) {
    for (double& v : t.values()) v = name.ends_with("gain") ? 1.0 + 0.4 * (rng.uniform() - 0.5) : rng.uniform() - 0.5;
    index[&t] = leaves.size();
    leaves.push_back(&t);
    out.tensor_names.push_back(name);
  });
  const ScalarProgram program = [&](Tape&, std::span<const Var> vars) {
    const ModelWeights<Var> w = params.map<Var>([&](const Tensor& t) { return vars[index.at(&t)]; });
    DropoutStream off;
    const std::size_t gold[] = {prepared.gold};
    return ops::cross_entropy(forward(w, prepared, cfg, off), gold);
  };
  out.report = grad_check(program, leaves, step);
  return out;
}

}  // namespace gtrel
