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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "gtrel/graph/instance.hpp"

namespace gtrel {

inline constexpr int kDatasetSchemaVersion = 1;

/// One JSON object per line:
///   {id, tokens:[str], dep:[{head:int,label:str}],
///    entities:[{eid, kb_ids:[str], mentions:[[start,end]], mention_ids?:[str]}],
///    label, task:"nary5"|"nary2"|"binary_abs", source_id?}
/// Errors are Error(kParse) with "line N: field.path: reason".
RelationInstance parse_instance(const nlohmann::json& record, std::size_t line);
nlohmann::json to_json(const RelationInstance& inst);

std::vector<RelationInstance> read_dataset(std::istream& in, int schema_version = kDatasetSchemaVersion);
std::vector<RelationInstance> load_dataset(const std::filesystem::path& path,
                                           int schema_version = kDatasetSchemaVersion);
void write_dataset(std::ostream& out, const std::vector<RelationInstance>& instances);
void save_dataset(const std::filesystem::path& path, const std::vector<RelationInstance>& instances);

/// Minimal import adapter for the published n-ary graph format:
///   {sentences:[{nodes:[{label, arcs:[{toIndex, label}]}]}],
///    entities:[{type, indices:[int]}], relationLabel}
/// Entity indices run across the concatenated sentences; arc toIndex is
/// sentence-local. The first "deparc:*" arc of a node is
/// read as its child-to-head edge; nodes without one become sentence roots.
/// Other arc types and edge labels beyond the first are dropped.
RelationInstance import_nary_graph_record(const nlohmann::json& record, std::size_t line);

}  // namespace gtrel
