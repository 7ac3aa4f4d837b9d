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

#include "gtrel/graph/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

#include "gtrel/error.hpp"

namespace gtrel {
namespace {

using nlohmann::json;

[[noreturn]] void schema_error(std::size_t line, const std::string& path, const std::string& reason) {
  fail(ErrorKind::kParse, "line " + std::to_string(line) + ": " + path + ": " + reason);
}

const json& field(const json& obj, const char* key, std::size_t line, const std::string& path) {
  if (!obj.is_object()) schema_error(line, path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(line, path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

std::string as_string(const json& v, std::size_t line, const std::string& path) {
  if (!v.is_string()) schema_error(line, path, "expected a string");
  return v.get<std::string>();
}

std::size_t as_index(const json& v, std::size_t line, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    schema_error(line, path, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

const json& as_array(const json& v, std::size_t line, const std::string& path) {
  if (!v.is_array()) schema_error(line, path, "expected an array");
  return v;
}

std::string join(const std::string& base, const char* key) {
  return base.empty() ? key : base + "." + key;
}

std::string at(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

}  // namespace

RelationInstance parse_instance(const json& record, std::size_t line) {
  RelationInstance inst;
  inst.id = as_string(field(record, "id", line, ""), line, "id");

  const json& tokens = as_array(field(record, "tokens", line, ""), line, "tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i) inst.tokens.push_back(as_string(tokens[i], line, at("tokens", i)));

  const json& dep = as_array(field(record, "dep", line, ""), line, "dep");
  for (std::size_t i = 0; i < dep.size(); ++i) {
    const std::string path = at("dep", i);
    DepArc arc;
    arc.head = as_index(field(dep[i], "head", line, path), line, join(path, "head"));
    arc.label = as_string(field(dep[i], "label", line, path), line, join(path, "label"));
    inst.dep.push_back(std::move(arc));
  }

  const json& entities = as_array(field(record, "entities", line, ""), line, "entities");
  for (std::size_t e = 0; e < entities.size(); ++e) {
    const std::string path = at("entities", e);
    Entity entity;
    entity.eid = as_string(field(entities[e], "eid", line, path), line, join(path, "eid"));
    const json& ids = as_array(field(entities[e], "kb_ids", line, path), line, join(path, "kb_ids"));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      entity.kb_ids.push_back(as_string(ids[k], line, at(join(path, "kb_ids"), k)));
    }
    const std::string mpath = join(path, "mentions");
    const json& mentions = as_array(field(entities[e], "mentions", line, path), line, mpath);
    for (std::size_t m = 0; m < mentions.size(); ++m) {
      const json& pair = mentions[m];
      if (!pair.is_array() || pair.size() != 2) schema_error(line, at(mpath, m), "expected [start, end]");
      entity.mentions.push_back(
          {as_index(pair[0], line, at(mpath, m) + "[0]"), as_index(pair[1], line, at(mpath, m) + "[1]")});
    }
    if (auto it = entities[e].find("mention_ids"); it != entities[e].end()) {
      const std::string ipath = join(path, "mention_ids");
      const json& mids = as_array(*it, line, ipath);
      for (std::size_t m = 0; m < mids.size(); ++m) entity.mention_ids.push_back(as_string(mids[m], line, at(ipath, m)));
    }
    inst.entities.push_back(std::move(entity));
  }

  inst.label = as_string(field(record, "label", line, ""), line, "label");
  const std::string task = as_string(field(record, "task", line, ""), line, "task");
  try {
    inst.task = parse_task(task);
  } catch (const Error&) {
    schema_error(line, "task", "unknown task '" + task + "'");
  }
  if (auto it = record.find("source_id"); it != record.end()) inst.source_id = as_string(*it, line, "source_id");

  try {
    validate(inst);
  } catch (const Error& err) {
    fail(err.kind(), "line " + std::to_string(line) + ": " + err.what());
  }
  return inst;
}

json to_json(const RelationInstance& inst) {
  json dep = json::array();
  for (const DepArc& arc : inst.dep) dep.push_back({{"head", arc.head}, {"label", arc.label}});
  json entities = json::array();
  for (const Entity& e : inst.entities) {
    json mentions = json::array();
    for (const Span& s : e.mentions) mentions.push_back({s.begin, s.end});
    json entity = {{"eid", e.eid}, {"kb_ids", e.kb_ids}, {"mentions", mentions}};
    if (!e.mention_ids.empty()) entity["mention_ids"] = e.mention_ids;
    entities.push_back(std::move(entity));
  }
  json out = {{"id", inst.id},     {"tokens", inst.tokens}, {"dep", dep}, {"entities", entities},
              {"label", inst.label}, {"task", std::string(to_string(inst.task))}};
  if (!inst.source_id.empty()) out["source_id"] = inst.source_id;
  return out;
}

std::vector<RelationInstance> read_dataset(std::istream& in, int schema_version) {
  if (schema_version != kDatasetSchemaVersion) {
    fail(ErrorKind::kConfig, "unsupported dataset schema version " + std::to_string(schema_version));
  }
  std::vector<RelationInstance> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& err) {
      fail(ErrorKind::kParse, "line " + std::to_string(line) + ": malformed JSON: " + err.what());
    }
    out.push_back(parse_instance(record, line));
  }
  return out;
}

std::vector<RelationInstance> load_dataset(const std::filesystem::path& path, int schema_version) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open dataset " + path.string());
  return read_dataset(in, schema_version);
}

void write_dataset(std::ostream& out, const std::vector<RelationInstance>& instances) {
  for (const RelationInstance& inst : instances) out << to_json(inst).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const std::vector<RelationInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write dataset " + path.string());
  write_dataset(out, instances);
}

RelationInstance import_nary_graph_record(const json& record, std::size_t line) {
  RelationInstance inst;
  inst.task = Task::kNary5;
  inst.id = "line" + std::to_string(line);
  if (auto it = record.find("id"); it != record.end()) inst.id = it->is_string() ? it->get<std::string>() : it->dump();

  const json& sentences = as_array(field(record, "sentences", line, ""), line, "sentences");
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const std::string spath = at("sentences", s);
    const json& nodes = as_array(field(sentences[s], "nodes", line, spath), line, join(spath, "nodes"));
    const std::size_t offset = inst.tokens.size();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::string npath = at(join(spath, "nodes"), i);
      inst.tokens.push_back(as_string(field(nodes[i], "label", line, npath), line, join(npath, "label")));
      DepArc arc{offset + i, "root"};
      if (auto arcs = nodes[i].find("arcs"); arcs != nodes[i].end() && arcs->is_array()) {
        for (const json& a : *arcs) {
          const std::string label = a.value("label", "");
          if (label.rfind("deparc:", 0) != 0 || !a.contains("toIndex")) continue;
          const std::size_t to = as_index(a["toIndex"], line, join(npath, "arcs.toIndex"));
          if (to >= nodes.size()) schema_error(line, join(npath, "arcs.toIndex"), "outside the sentence");
          arc = {offset + to, label.substr(7)};
          break;
        }
      }
      inst.dep.push_back(std::move(arc));
    }
  }

  const json& entities = as_array(field(record, "entities", line, ""), line, "entities");
  for (std::size_t e = 0; e < entities.size(); ++e) {
    const std::string epath = at("entities", e);
    Entity entity;
    entity.eid = as_string(field(entities[e], "type", line, epath), line, join(epath, "type"));
    std::transform(entity.eid.begin(), entity.eid.end(), entity.eid.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    std::vector<std::size_t> indices;
    for (const json& v : as_array(field(entities[e], "indices", line, epath), line, join(epath, "indices"))) {
      indices.push_back(as_index(v, line, join(epath, "indices")));
    }
    std::sort(indices.begin(), indices.end());
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (k > 0 && indices[k] == indices[k - 1] + 1) {
        entity.mentions.back().end = indices[k] + 1;
      } else if (k == 0 || indices[k] != indices[k - 1]) {
        entity.mentions.push_back({indices[k], indices[k] + 1});
      }
    }
    inst.entities.push_back(std::move(entity));
  }
  inst.label = as_string(field(record, "relationLabel", line, ""), line, "relationLabel");
  std::transform(inst.label.begin(), inst.label.end(), inst.label.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto pos = inst.label.find("non-response"); pos != std::string::npos) inst.label.replace(pos, 12, "nonresponse");
  validate(inst);
  return inst;
}

}  // namespace gtrel
