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


// gtrel: command-line front end for data prep, training and evaluation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "gtrel/error.hpp"
#include "gtrel/graph/dataset.hpp"
#include "gtrel/graph/dependency.hpp"
#include "gtrel/graph/neighbors.hpp"
#include "gtrel/harness.hpp"

namespace {

using nlohmann::json;
using gtrel::ErrorKind;
using gtrel::fail;

enum class Kind { kInt, kFloat, kString, kList, kFlag };

struct OptionDef {
  std::string key;
  Kind kind;
  std::string help;
};

const std::vector<OptionDef>& model_options() {
  static const std::vector<OptionDef> defs = {
      {"task", Kind::kString, "label inventory: nary5, nary2 or binary_abs"},
      {"width", Kind::kInt, "model width h"},
      {"heads", Kind::kInt, "attention heads"},
      {"ffn_width", Kind::kInt, "feed-forward inner width"},
      {"transformer_blocks", Kind::kInt, "Transformer block count"},
      {"graph_blocks", Kind::kInt, "GT block count"},
      {"dropout_rate", Kind::kFloat, "dropout rate in [0,1)"},
      {"max_len", Kind::kInt, "position table size"},
      {"label_set", Kind::kList, "comma-separated labels (overrides task)"},
      {"entity_slots", Kind::kList, "comma-separated entity slot names"},
      {"gt_sentence_mode", Kind::kString, "entity_mean or cls"},
      {"neighbor_cap", Kind::kInt, "maximum neighbors per token"},
      {"ablate_graph", Kind::kFlag, "zero the GT contribution"},
  };
  return defs;
}

const std::vector<OptionDef>& train_options() {
  static const std::vector<OptionDef> defs = {
      {"seed", Kind::kInt, "base seed"},
      {"epochs", Kind::kInt, "maximum epochs"},
      {"batch_size", Kind::kInt, "minibatch size"},
      {"learning_rate", Kind::kFloat, "peak learning rate"},
      {"beta1", Kind::kFloat, "Adam beta1"},
      {"beta2", Kind::kFloat, "Adam beta2"},
      {"adam_epsilon", Kind::kFloat, "Adam epsilon"},
      {"warmup_fraction", Kind::kFloat, "share of steps spent in linear warmup"},
      {"validation_size", Kind::kInt, "held-out validation instances"},
      {"target_train_accuracy", Kind::kFloat, "stop once train accuracy reaches this"},
  };
  return defs;
}

struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::string config_path;
  std::set<std::string> allowed;
};

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

void add_option(Command& cmd, const OptionDef& def) {
  cmd.allowed.insert(def.key);
  if (def.kind == Kind::kFlag) {
    cmd.flags[def.key] = false;
    cmd.app->add_flag(flag_name(def.key), cmd.flags[def.key], def.help);
  } else {
    cmd.app->add_option(flag_name(def.key), cmd.values[def.key], def.help);
  }
}

Command& add_command(CLI::App& app, std::vector<std::unique_ptr<Command>>& commands, const std::string& name,
                     const std::string& help, std::vector<OptionDef> extra, bool model, bool training) {
  auto cmd = std::make_unique<Command>();
  cmd->app = app.add_subcommand(name, help);
  cmd->app->add_option("--config", cmd->config_path, "JSON file of option values; flags override it");
  for (const auto& def : extra) add_option(*cmd, def);
  if (model)
    for (const auto& def : model_options()) add_option(*cmd, def);
  if (training)
    for (const auto& def : train_options()) add_option(*cmd, def);
  commands.push_back(std::move(cmd));
  return *commands.back();
}

Kind kind_of(const std::string& key) {
  for (const auto* defs : {&model_options(), &train_options()})
    for (const auto& d : *defs)
      if (d.key == key) return d.kind;
  static const std::set<std::string> ints = {"n", "k", "partitions", "train_size", "test_size"};
  static const std::set<std::string> flags = {"import_nary", "quiet"};
  if (ints.count(key)) return Kind::kInt;
  if (flags.count(key)) return Kind::kFlag;
  if (key == "caps") return Kind::kList;
  if (key == "b_overrides") return Kind::kString;
  return Kind::kString;
}

json convert(const std::string& key, const std::string& text) {
  switch (kind_of(key)) {
    case Kind::kInt:
      try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used != text.size() || v < 0) throw std::invalid_argument(text);
        return json(static_cast<std::size_t>(v));
      } catch (const std::exception&) {
        fail(ErrorKind::kConfig, "option " + flag_name(key) + " expects a non-negative integer, got '" + text + "'");
      }
    case Kind::kFloat:
      try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return json(v);
      } catch (const std::exception&) {
        fail(ErrorKind::kConfig, "option " + flag_name(key) + " expects a number, got '" + text + "'");
      }
    case Kind::kList: {
      json list = json::array();
      std::stringstream in(text);
      std::string item;
      while (std::getline(in, item, ',')) list.push_back(item);
      return list;
    }
    case Kind::kFlag:
      return json(text == "true" || text == "1");
    case Kind::kString:
      break;
  }
  return json(text);
}

/// Config file values, then explicitly given flags on top.
json resolve(const Command& cmd) {
  json merged = json::object();
  if (!cmd.config_path.empty()) {
    std::ifstream in(cmd.config_path);
    if (!in) fail(ErrorKind::kIo, "cannot open config file " + cmd.config_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kParse, "config file " + cmd.config_path + ": " + e.what());
    }
    if (!file.is_object()) fail(ErrorKind::kConfig, "config file must hold a JSON object");
    for (const auto& item : file.items()) {
      if (!cmd.allowed.count(item.key())) {
        fail(ErrorKind::kConfig, "config key '" + item.key() + "' does not apply to " + cmd.app->get_name());
      }
      json value = item.value();
      if (kind_of(item.key()) == Kind::kList && value.is_string()) value = convert(item.key(), value.get<std::string>());
      merged[item.key()] = value;
    }
  }
  for (const auto& [key, text] : cmd.values) {
    if (cmd.app->count(flag_name(key)) > 0) merged[key] = convert(key, text);
  }
  for (const auto& [key, on] : cmd.flags) {
    if (cmd.app->count(flag_name(key)) > 0) merged[key] = on;
  }
  return merged;
}

std::string need_string(const json& opts, const std::string& key) {
  auto it = opts.find(key);
  if (it == opts.end() || !it->is_string() || it->get<std::string>().empty()) {
    fail(ErrorKind::kConfig, "missing required option " + flag_name(key));
  }
  return it->get<std::string>();
}

template <typename T>
T get_or(const json& opts, const std::string& key, T fallback) {
  auto it = opts.find(key);
  if (it == opts.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kConfig, "option " + flag_name(key) + " has the wrong type");
  }
}

gtrel::TrainSpec train_spec(const json& opts) {
  gtrel::TrainSpec spec;
  spec.seed = get_or(opts, "seed", spec.seed);
  spec.epochs = get_or(opts, "epochs", spec.epochs);
  spec.batch_size = get_or(opts, "batch_size", spec.batch_size);
  spec.learning_rate = get_or(opts, "learning_rate", spec.learning_rate);
  spec.beta1 = get_or(opts, "beta1", spec.beta1);
  spec.beta2 = get_or(opts, "beta2", spec.beta2);
  spec.adam_epsilon = get_or(opts, "adam_epsilon", spec.adam_epsilon);
  spec.warmup_fraction = get_or(opts, "warmup_fraction", spec.warmup_fraction);
  if (opts.contains("validation_size")) spec.validation_size = get_or<std::size_t>(opts, "validation_size", 0);
  if (opts.contains("target_train_accuracy")) {
    spec.target_train_accuracy = get_or<double>(opts, "target_train_accuracy", 1.0);
  }
  spec.validate();
  return spec;
}

/// Model options, with the task and entity slots defaulting from the data.
gtrel::ModelConfig model_config(const json& opts, std::span<const gtrel::RelationInstance> data) {
  json model = json::object();
  for (const auto& def : model_options()) {
    if (def.key != "task" && opts.contains(def.key)) model[def.key] = opts[def.key];
  }
  gtrel::ModelConfig cfg = gtrel::model_config_from_json(model);
  if (!opts.contains("label_set")) {
    gtrel::Task task;
    if (opts.contains("task")) {
      task = gtrel::parse_task(get_or<std::string>(opts, "task", ""));
    } else {
      if (data.empty()) fail(ErrorKind::kConfig, "cannot infer the task from an empty dataset");
      task = data.front().task;
      for (const auto& inst : data)
        if (inst.task != task) fail(ErrorKind::kConfig, "dataset mixes tasks; pass --task");
    }
    cfg.label_set = gtrel::task_labels(task);
  }
  if (!opts.contains("entity_slots")) {
    if (data.empty()) fail(ErrorKind::kConfig, "cannot infer entity slots from an empty dataset");
    cfg.entity_slots.clear();
    for (const auto& e : data.front().entities) cfg.entity_slots.push_back(e.eid);
  }
  if (!opts.contains("max_len")) {
    std::size_t longest = 0;
    for (const auto& inst : data) longest = std::max(longest, inst.tokens.size());
    cfg.encoder.max_len = std::max(cfg.encoder.max_len, longest + 1);
  }
  return cfg;
}

std::vector<gtrel::RelationInstance> load(const json& opts, const std::string& key) {
  return gtrel::load_dataset(need_string(opts, key));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  return out;
}

gtrel::EpochCallback progress(const json& opts) {
  if (get_or(opts, "quiet", false)) return {};
  return [](const gtrel::EpochRecord& r) {
    std::cerr << json{{"epoch", r.epoch},
                      {"batch_loss", r.batch_loss},
                      {"train_loss", r.train_loss},
                      {"train_accuracy", r.train_accuracy}}
                     .dump()
              << '\n';
  };
}

int run_prep(const json& opts) {
  std::vector<gtrel::RelationInstance> data;
  if (get_or(opts, "import_nary", false)) {
    std::ifstream in(need_string(opts, "data"));
    if (!in) fail(ErrorKind::kIo, "cannot open " + need_string(opts, "data"));
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      json record;
      try {
        record = json::parse(text);
      } catch (const json::parse_error& e) {
        fail(ErrorKind::kParse, "line " + std::to_string(line) + ": malformed JSON: " + e.what());
      }
      data.push_back(gtrel::import_nary_graph_record(record, line));
    }
  } else {
    data = load(opts, "data");
  }
  std::optional<std::size_t> cap;
  if (opts.contains("neighbor_cap")) cap = get_or<std::size_t>(opts, "neighbor_cap", 0);
  std::ofstream out = open_out(need_string(opts, "out"));
  std::size_t written = 0;
  for (const auto& inst : data) {
    for (const auto& e : gtrel::expand_entities(inst)) {
      json record = gtrel::to_json(e);
      record["neighbors"] = gtrel::build_neighbors(e, cap).neighbors;
      record["single_sentence"] = gtrel::single_sentence(e);
      out << record.dump() << '\n';
      ++written;
    }
  }
  std::cout << json{{"instances", data.size()}, {"expanded", written}}.dump() << '\n';
  return 0;
}

int run_synth(const json& opts) {
  const auto n = get_or<std::size_t>(opts, "n", 640);
  const auto seed = get_or<std::uint64_t>(opts, "seed", 1);
  const auto data = gtrel::generate_synthetic(n, seed);
  gtrel::save_dataset(need_string(opts, "out"), data);
  std::cout << json{{"instances", data.size()}, {"seed", seed}}.dump() << '\n';
  return 0;
}

int run_train(const json& opts) {
  const auto data = load(opts, "train");
  std::vector<gtrel::RelationInstance> valid;
  if (opts.contains("valid")) valid = load(opts, "valid");
  const gtrel::TrainSpec spec = train_spec(opts);
  const gtrel::ModelConfig cfg = model_config(opts, data);
  const gtrel::TrainResult result = gtrel::train(data, spec, cfg, valid, nullptr, progress(opts));
  gtrel::save_checkpoint(need_string(opts, "out"), result.checkpoint);
  if (opts.contains("curve")) {
    std::ofstream curve = open_out(need_string(opts, "curve"));
    gtrel::write_curve_csv(curve, result.curve);
  }
  if (result.diverged) {
    fail(ErrorKind::kDivergence, "loss became non-finite after " + std::to_string(result.epochs_run) +
                                     " completed epochs; last good checkpoint written");
  }
  std::cout << json{{"epochs_run", result.epochs_run},
                    {"selected_epoch", result.selected_epoch},
                    {"reached_target", result.reached_target},
                    {"parameters", gtrel::parameter_count(result.checkpoint.params)},
                    {"final_train_accuracy", result.curve.empty() ? 0.0 : result.curve.back().train_accuracy}}
                   .dump()
            << '\n';
  return 0;
}

void write_metrics_csv(std::ostream& out, const gtrel::EvalReport& report) {
  out.precision(17);
  out << "subset,metric,value\n";
  for (const auto& [name, m] : {std::pair{"all", &report.all}, std::pair{"single", &report.single}}) {
    out << name << ",total," << m->total << '\n' << name << ",accuracy," << m->accuracy << '\n';
    if (m->binary) {
      out << name << ",precision," << m->precision << '\n'
          << name << ",recall," << m->recall << '\n'
          << name << ",f1," << m->f1 << '\n';
    }
    for (const auto& c : m->per_class) out << name << ",accuracy[" << c.label << "]," << c.accuracy << '\n';
  }
}

int run_eval(const json& opts) {
  const gtrel::Checkpoint ckpt = gtrel::load_checkpoint(need_string(opts, "checkpoint"));
  const auto data = load(opts, "data");
  std::optional<gtrel::Task> task;
  if (opts.contains("task")) task = gtrel::parse_task(get_or<std::string>(opts, "task", ""));
  const gtrel::EvalReport report = gtrel::evaluate(ckpt, data, task);
  if (opts.contains("predictions")) {
    std::ofstream out = open_out(need_string(opts, "predictions"));
    gtrel::write_predictions_jsonl(out, report.predictions);
  }
  if (opts.contains("metrics")) {
    std::ofstream out = open_out(need_string(opts, "metrics"));
    write_metrics_csv(out, report);
  }
  std::cout << gtrel::to_json(report).dump(2) << '\n';
  return 0;
}

int run_kfold(const json& opts) {
  const auto data = load(opts, "data");
  const gtrel::KFoldReport report =
      gtrel::kfold(data, get_or<std::size_t>(opts, "k", 5), train_spec(opts), model_config(opts, data), progress(opts));
  const json out = gtrel::to_json(report);
  if (opts.contains("out")) open_out(need_string(opts, "out")) << out.dump(2) << '\n';
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_sigtest(const json& opts) {
  const auto data = load(opts, "data");
  const gtrel::ModelConfig a = model_config(opts, data);
  gtrel::ModelConfig b = a;
  if (opts.contains("b_overrides")) {
    json overrides;
    try {
      overrides = json::parse(get_or<std::string>(opts, "b_overrides", "{}"));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kParse, std::string("--b-overrides: ") + e.what());
    }
    b = gtrel::model_config_from_json(overrides, a);
  }
  const std::size_t partitions = get_or<std::size_t>(opts, "partitions", 10);
  const std::size_t train_size = get_or<std::size_t>(opts, "train_size", data.size() * 4 / 5);
  const std::size_t test_size = get_or<std::size_t>(opts, "test_size", data.size() - train_size);
  const auto report = gtrel::significance_test(data, a, b, partitions, train_size, test_size, train_spec(opts));
  std::cout << gtrel::to_json(report).dump(2) << '\n';
  return 0;
}

int run_sweep(const json& opts) {
  const auto train_data = load(opts, "train");
  const auto test_data = load(opts, "test");
  std::vector<std::optional<std::size_t>> caps;
  for (const json& c : get_or<json>(opts, "caps", json::array({"1", "2", "4", "8", "none"}))) {
    const std::string text = c.is_string() ? c.get<std::string>() : c.dump();
    if (text == "none") {
      caps.push_back(std::nullopt);
    } else {
      caps.push_back(convert("k", text).get<std::size_t>());
    }
  }
  const auto rows = gtrel::sweep_neighbor_cap(train_data, test_data, caps, train_spec(opts),
                                              model_config(opts, train_data));
  std::ostringstream csv;
  gtrel::write_sweep_csv(csv, rows);
  if (opts.contains("out")) open_out(need_string(opts, "out")) << csv.str();
  std::cout << csv.str();
  return 0;
}

int run_gradcheck(const json& opts) {
  json model = {{"width", 8}, {"heads", 2}, {"ffn_width", 16}, {"transformer_blocks", 1}, {"graph_blocks", 1},
                {"label_set", {"a", "b", "c"}}, {"entity_slots", {"E1", "E2"}}};
  for (const auto& def : model_options()) {
    if (def.key != "task" && opts.contains(def.key)) model[def.key] = opts[def.key];
  }
  const gtrel::ModelConfig cfg = gtrel::model_config_from_json(model);
  const auto tokens = get_or<std::size_t>(opts, "n", 5);
  const auto result = gtrel::model_grad_check(cfg, get_or<std::uint64_t>(opts, "seed", 1), tokens, 1e-5);
  const auto& r = result.report;
  std::cout << json{{"max_relative_error", r.max_relative_error},
                    {"worst_tensor", result.tensor_names.at(r.worst_tensor)},
                    {"worst_index", r.worst_index},
                    {"analytic", r.worst_analytic},
                    {"numeric", r.worst_numeric},
                    {"coordinates", r.coordinates},
                    {"pass", r.max_relative_error < 1e-4}}
                   .dump(2)
            << '\n';
  return r.max_relative_error < 1e-4 ? 0 : 3;
}

void error_record(const std::string& kind, const std::string& message, const std::string& command) {
  std::cerr << json{{"error", kind}, {"message", message}, {"command", command}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gtrel: graph-transformer relation classification"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;
  const OptionDef data{"data", Kind::kString, "dataset JSONL"};
  const OptionDef out{"out", Kind::kString, "output path"};
  const OptionDef quiet{"quiet", Kind::kFlag, "no per-epoch progress on stderr"};

  std::map<std::string, int (*)(const json&)> handlers = {
      {"prep", run_prep},   {"synth", run_synth},     {"train", run_train}, {"eval", run_eval},
      {"kfold", run_kfold}, {"sigtest", run_sigtest}, {"sweep", run_sweep}, {"gradcheck", run_gradcheck}};
  add_command(app, commands, "prep", "validate, expand and attach neighbor graphs",
              {data, out, {"neighbor_cap", Kind::kInt, "maximum neighbors per token"},
               {"import_nary", Kind::kFlag, "input holds n-ary graph records"}},
              false, false);
  add_command(app, commands, "synth", "write a synthetic trigger-path dataset",
              {out, {"n", Kind::kInt, "instance count"}, {"seed", Kind::kInt, "seed"}}, false, false);
  add_command(app, commands, "train", "train a model and write a checkpoint",
              {{"train", Kind::kString, "training JSONL"}, {"valid", Kind::kString, "validation JSONL"},
               {"out", Kind::kString, "checkpoint path"}, {"curve", Kind::kString, "loss curve CSV"}, quiet},
              true, true);
  add_command(app, commands, "eval", "score a checkpoint on a dataset",
              {data, {"checkpoint", Kind::kString, "checkpoint path"}, {"task", Kind::kString, "expected task"},
               {"predictions", Kind::kString, "predictions JSONL"}, {"metrics", Kind::kString, "metrics CSV"}},
              false, false);
  add_command(app, commands, "kfold", "k-fold cross-validation",
              {data, out, {"k", Kind::kInt, "fold count"}, quiet}, true, true);
  add_command(app, commands, "sigtest", "paired significance test of two configs",
              {data, {"partitions", Kind::kInt, "train/test partitions"}, {"train_size", Kind::kInt, "train size"},
               {"test_size", Kind::kInt, "test size"},
               {"b_overrides", Kind::kString, "JSON object of model options for config B"}},
              true, true);
  add_command(app, commands, "sweep", "retrain across neighbor caps",
              {{"train", Kind::kString, "training JSONL"}, {"test", Kind::kString, "test JSONL"}, out,
               {"caps", Kind::kList, "comma-separated caps; 'none' is uncapped"}},
              true, true);
  add_command(app, commands, "gradcheck", "finite-difference check of the full model",
              {{"seed", Kind::kInt, "seed"}, {"n", Kind::kInt, "instance tokens"}}, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_record("usage_error", e.what(), "");
    return 2;
  }

  for (const auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    const std::string name = cmd->app->get_name();
    try {
      return handlers.at(name)(resolve(*cmd));
    } catch (const gtrel::Error& e) {
      error_record(std::string(gtrel::to_string(e.kind())), e.what(), name);
      return 1;
    } catch (const std::exception& e) {
      error_record("internal_error", e.what(), name);
      return 1;
    }
  }
  return 0;
}
