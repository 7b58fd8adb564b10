/*
 * Copyright (c) 2026, The vizlink Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizlink/value.hpp"

namespace vizlink {

struct FieldSchema {
  std::string name;
  FieldKind kind = FieldKind::nominal;
  /// Descriptor type the cells were parsed as: integer, number, string, or boolean.
  std::string storage_type = "string";
  std::optional<std::string> description;
  std::optional<double> declared_min;
  std::optional<double> declared_max;
  std::vector<std::string> declared_categories;

  bool numeric_storage() const noexcept { return storage_type == "integer" || storage_type == "number"; }
};

/// A direct foreign key: from_entity.from_fields references to_entity.to_fields.
struct Relationship {
  std::string from_entity;
  std::vector<std::string> from_fields;
  std::string to_entity;
  std::vector<std::string> to_fields;

  bool operator==(const Relationship&) const = default;
  bool touches(std::string_view entity) const noexcept { return from_entity == entity || to_entity == entity; }
};

nlohmann::json to_json(const Relationship& rel);
Relationship relationship_from_json(const nlohmann::json& doc);

struct EntityTable {
  std::string name;
  std::string path;
  std::string description;
  std::vector<FieldSchema> fields;
  std::vector<std::string> primary_key;
  /// Typed cells in schema order.
  std::vector<std::vector<Cell>> rows;
  /// Cell text exactly as read, used for downloads.
  std::vector<std::vector<std::string>> raw_rows;
  std::string line_terminator = "\n";

  std::size_t row_count() const noexcept { return rows.size(); }
  std::optional<std::size_t> field_index(std::string_view field) const noexcept;
  const FieldSchema* find_field(std::string_view field) const noexcept;
  /// Column indices for the named fields. Throws Error(UnknownField).
  std::vector<std::size_t> columns_of(std::span<const std::string> names) const;
  Key key_of(std::size_t row, std::span<const std::size_t> columns) const;
  std::vector<std::string> field_names() const;
};

struct Package {
  std::string name;
  std::string title;
  std::filesystem::path descriptor_path;
  std::vector<EntityTable> entities;
  std::vector<Relationship> relations;
  /// Non-fatal notes from loading, such as ignored descriptor keys.
  std::vector<std::string> warnings;

  const EntityTable* find_entity(std::string_view entity) const noexcept;
  /// Throws Error(UnknownEntity).
  const EntityTable& entity(std::string_view entity) const;
};

/// Loads a datapackage.json descriptor (or the directory holding one) and its CSV resources.
Package load_package(const std::filesystem::path& path);

struct FieldStats {
  std::string entity;
  std::string field;
  FieldKind kind = FieldKind::nominal;
  std::optional<double> observed_min;
  std::optional<double> observed_max;
  /// Non-null categories with counts, ascending by value. Empty for quantitative fields.
  std::vector<std::pair<Cell, std::size_t>> categories;
  std::size_t null_count = 0;
  std::size_t distinct_count = 0;
};

/// Statistics for one field of a table, identifiers included.
FieldStats profile_field(const EntityTable& table, std::size_t column);

/// One FieldStats per non-identifier field of the entity. Throws Error(UnknownEntity).
std::vector<FieldStats> field_profile(const Package& package, std::string_view entity);

struct RelationMatch {
  Relationship relationship;
  /// True when the first queried entity holds the foreign key.
  bool forward = false;
};

/// The direct foreign-key relation between two entities, if any. Never searches multi-hop paths.
/// Throws Error(UnknownEntity) or Error(AmbiguousRelation).
std::optional<RelationMatch> relation_between(const Package& package, std::string_view a, std::string_view b);

}  // namespace vizlink
