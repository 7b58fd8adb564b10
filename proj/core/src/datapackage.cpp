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

#include "vizlink/datapackage.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "vizlink/csv.hpp"
#include "vizlink/error.hpp"

namespace vizlink {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kPackageKeys = {
    "name",     "title",   "description", "resources", "licenses", "profile",  "version",
    "sources",  "id",      "homepage",    "keywords",  "created",  "contributors", "$schema"};
const std::set<std::string, std::less<>> kResourceKeys = {
    "name",   "path",     "schema",  "title", "description", "format", "mediatype",
    "encoding", "profile", "licenses", "sources", "bytes", "hash", "dialect"};
const std::set<std::string, std::less<>> kSchemaKeys = {"fields", "primaryKey", "foreignKeys", "missingValues"};
const std::set<std::string, std::less<>> kFieldKeys = {
    "name", "type", "description", "title", "constraints", "format", "categories", "categoriesOrdered", "example"};

void warn_unknown(const json& obj, const std::set<std::string, std::less<>>& known, const std::string& where,
                  std::vector<std::string>& warnings) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) warnings.push_back("ignoring unknown key '" + key + "' in " + where);
  }
}

std::vector<std::string> string_or_list(const json& value, const std::string& locus) {
  if (value.is_string()) return {value.get<std::string>()};
  if (value.is_array()) {
    std::vector<std::string> out;
    for (const auto& v : value) {
      if (!v.is_string()) throw Error(ErrorCode::SchemaViolation, "expected field name", locus);
      out.push_back(v.get<std::string>());
    }
    return out;
  }
  throw Error(ErrorCode::SchemaViolation, "expected a field name or a list of field names", locus);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingResource, "cannot open file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

FieldSchema parse_field(const json& doc, const std::string& locus, std::vector<std::string>& warnings) {
  if (!doc.is_object() || !doc.contains("name") || !doc["name"].is_string()) {
    throw Error(ErrorCode::SchemaViolation, "field needs a string name", locus);
  }
  FieldSchema field;
  field.name = doc["name"].get<std::string>();
  warn_unknown(doc, kFieldKeys, locus + "/" + field.name, warnings);
  std::string type = doc.value("type", "string");
  if (type == "integer" || type == "number") {
    field.kind = FieldKind::quantitative;
    field.storage_type = type;
  } else if (type == "string" || type == "boolean") {
    field.kind = FieldKind::nominal;
    field.storage_type = type;
  } else {
    warnings.push_back("field " + locus + "/" + field.name + " has type '" + type + "'; treated as string");
    field.kind = FieldKind::nominal;
    field.storage_type = "string";
  }
  if (doc.contains("description") && doc["description"].is_string()) {
    field.description = doc["description"].get<std::string>();
  }
  if (doc.contains("constraints")) {
    const auto& c = doc["constraints"];
    if (c.contains("enum") && c["enum"].is_array()) {
      for (const auto& v : c["enum"]) field.declared_categories.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
    if (c.contains("minimum") && c["minimum"].is_number()) field.declared_min = c["minimum"].get<double>();
    if (c.contains("maximum") && c["maximum"].is_number()) field.declared_max = c["maximum"].get<double>();
  }
  if (doc.contains("categories") && doc["categories"].is_array()) {
    field.declared_categories.clear();
    for (const auto& v : doc["categories"]) {
      if (v.is_object() && v.contains("value")) {
        field.declared_categories.push_back(v["value"].is_string() ? v["value"].get<std::string>() : v["value"].dump());
      } else {
        field.declared_categories.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
    }
    if (field.kind == FieldKind::nominal && doc.value("categoriesOrdered", false)) field.kind = FieldKind::ordinal;
  }
  return field;
}

Cell parse_cell(const FieldSchema& field, const std::string& text, const std::string& locus) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (field.storage_type == "integer") {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
      throw Error(ErrorCode::SchemaViolation, "'" + text + "' is not an integer", locus);
    }
    return static_cast<double>(v);
  }
  if (field.storage_type == "number") {
    double v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
      throw Error(ErrorCode::SchemaViolation, "'" + text + "' is not a finite number", locus);
    }
    return v;
  }
  if (field.storage_type == "boolean") {
    if (text == "true" || text == "True" || text == "TRUE" || text == "1") return std::string("true");
    if (text == "false" || text == "False" || text == "FALSE" || text == "0") return std::string("false");
    throw Error(ErrorCode::SchemaViolation, "'" + text + "' is not a boolean", locus);
  }
  return text;
}

void check_constraints(const FieldSchema& field, const Cell& cell, const std::string& locus) {
  if (is_null(cell)) return;
  if (const auto* d = std::get_if<double>(&cell)) {
    if ((field.declared_min && *d < *field.declared_min) || (field.declared_max && *d > *field.declared_max)) {
      throw Error(ErrorCode::SchemaViolation, format_number(*d) + " outside declared range", locus);
    }
    return;
  }
  if (!field.declared_categories.empty()) {
    const auto& s = std::get<std::string>(cell);
    if (std::find(field.declared_categories.begin(), field.declared_categories.end(), s) ==
        field.declared_categories.end()) {
      throw Error(ErrorCode::SchemaViolation, "'" + s + "' not among declared categories", locus);
    }
  }
}

struct PendingForeignKey {
  std::vector<std::string> fields;
  std::string resource;
  std::vector<std::string> reference_fields;
  std::string locus;
};

}  // namespace

json to_json(const Relationship& rel) {
  return json{{"from_entity", rel.from_entity},
              {"from_fields", rel.from_fields},
              {"to_entity", rel.to_entity},
              {"to_fields", rel.to_fields}};
}

Relationship relationship_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "relationship must be an object");
  try {
    Relationship rel;
    rel.from_entity = doc.at("from_entity").get<std::string>();
    rel.from_fields = doc.at("from_fields").get<std::vector<std::string>>();
    rel.to_entity = doc.at("to_entity").get<std::string>();
    rel.to_fields = doc.at("to_fields").get<std::vector<std::string>>();
    for (const auto& [key, _] : doc.items()) {
      if (key != "from_entity" && key != "from_fields" && key != "to_entity" && key != "to_fields") {
        throw Error(ErrorCode::MalformedDocument, "unknown relationship key '" + key + "'");
      }
    }
    if (rel.from_fields.empty() || rel.from_fields.size() != rel.to_fields.size()) {
      throw Error(ErrorCode::MalformedDocument, "relationship field lists must be non-empty and of equal length");
    }
    return rel;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("bad relationship: ") + e.what());
  }
}

std::optional<std::size_t> EntityTable::field_index(std::string_view field) const noexcept {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].name == field) return i;
  }
  return std::nullopt;
}

const FieldSchema* EntityTable::find_field(std::string_view field) const noexcept {
  auto idx = field_index(field);
  return idx ? &fields[*idx] : nullptr;
}

std::vector<std::size_t> EntityTable::columns_of(std::span<const std::string> names) const {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    auto idx = field_index(n);
    if (!idx) throw Error(ErrorCode::UnknownField, "entity '" + name + "' has no field '" + n + "'", name + "/" + n);
    out.push_back(*idx);
  }
  return out;
}

Key EntityTable::key_of(std::size_t row, std::span<const std::size_t> columns) const {
  Key key;
  key.reserve(columns.size());
  for (auto c : columns) key.push_back(rows[row][c]);
  return key;
}

std::vector<std::string> EntityTable::field_names() const {
  std::vector<std::string> out;
  out.reserve(fields.size());
  for (const auto& f : fields) out.push_back(f.name);
  return out;
}

const EntityTable* Package::find_entity(std::string_view entity) const noexcept {
  for (const auto& e : entities) {
    if (e.name == entity) return &e;
  }
  return nullptr;
}

const EntityTable& Package::entity(std::string_view entity) const {
  if (const auto* e = find_entity(entity)) return *e;
  throw Error(ErrorCode::UnknownEntity, "no entity named '" + std::string(entity) + "'", std::string(entity));
}

Package load_package(const std::filesystem::path& path) {
  const auto descriptor_path = std::filesystem::is_directory(path) ? path / "datapackage.json" : path;
  if (!std::filesystem::exists(descriptor_path)) {
    throw Error(ErrorCode::MissingResource, "descriptor not found", descriptor_path.string());
  }
  json doc;
  try {
    doc = json::parse(read_file(descriptor_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("descriptor is not valid JSON: ") + e.what(),
                descriptor_path.string());
  }
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "descriptor must be an object", descriptor_path.string());

  Package pkg;
  pkg.descriptor_path = descriptor_path;
  pkg.name = doc.value("name", descriptor_path.parent_path().filename().string());
  pkg.title = doc.value("title", pkg.name);
  warn_unknown(doc, kPackageKeys, "package", pkg.warnings);

  if (!doc.contains("resources") || !doc["resources"].is_array() || doc["resources"].empty()) {
    throw Error(ErrorCode::MissingResource, "descriptor lists no resources", descriptor_path.string());
  }

  const auto base = descriptor_path.parent_path();
  std::vector<std::vector<PendingForeignKey>> pending;
  std::set<std::string> seen_names;

  for (std::size_t r = 0; r < doc["resources"].size(); ++r) {
    const auto& res = doc["resources"][r];
    const std::string rlocus = "resources/" + std::to_string(r);
    if (!res.is_object()) throw Error(ErrorCode::SchemaViolation, "resource must be an object", rlocus);
    if (!res.contains("path") || !res["path"].is_string()) {
      throw Error(ErrorCode::MissingResource, "resource has no local path", rlocus);
    }
    EntityTable table;
    table.path = res["path"].get<std::string>();
    table.name = res.value("name", std::filesystem::path(table.path).stem().string());
    table.description = res.value("description", res.value("title", std::string{}));
    warn_unknown(res, kResourceKeys, rlocus, pkg.warnings);
    if (!seen_names.insert(table.name).second) {
      throw Error(ErrorCode::SchemaViolation, "duplicate entity name '" + table.name + "'", rlocus);
    }

    if (!res.contains("schema") || !res["schema"].is_object()) {
      throw Error(ErrorCode::SchemaViolation, "resource needs an inline schema", rlocus);
    }
    const auto& schema = res["schema"];
    warn_unknown(schema, kSchemaKeys, rlocus + "/schema", pkg.warnings);
    if (!schema.contains("fields") || !schema["fields"].is_array()) {
      throw Error(ErrorCode::SchemaViolation, "schema needs a fields list", rlocus);
    }
    std::set<std::string> field_names;
    for (const auto& f : schema["fields"]) {
      auto field = parse_field(f, table.name, pkg.warnings);
      if (!field_names.insert(field.name).second) {
        throw Error(ErrorCode::SchemaViolation, "duplicate field '" + field.name + "'", table.name);
      }
      table.fields.push_back(std::move(field));
    }
    if (schema.contains("primaryKey")) table.primary_key = string_or_list(schema["primaryKey"], table.name);
    for (const auto& pk : table.primary_key) {
      if (!table.field_index(pk)) throw Error(ErrorCode::SchemaViolation, "primary key names unknown field '" + pk + "'", table.name);
    }

    std::vector<PendingForeignKey> fks;
    if (schema.contains("foreignKeys")) {
      for (std::size_t k = 0; k < schema["foreignKeys"].size(); ++k) {
        const auto& fk = schema["foreignKeys"][k];
        const std::string flocus = table.name + "/foreignKeys/" + std::to_string(k);
        if (!fk.contains("fields") || !fk.contains("reference")) {
          throw Error(ErrorCode::DanglingForeignKey, "foreign key needs fields and reference", flocus);
        }
        PendingForeignKey p;
        p.fields = string_or_list(fk["fields"], flocus);
        p.resource = fk["reference"].value("resource", std::string{});
        if (!fk["reference"].contains("fields")) throw Error(ErrorCode::DanglingForeignKey, "reference needs fields", flocus);
        p.reference_fields = string_or_list(fk["reference"]["fields"], flocus);
        p.locus = flocus;
        fks.push_back(std::move(p));
      }
    }
    pending.push_back(std::move(fks));

    std::vector<std::string> missing_values = {"", "NA"};
    if (schema.contains("missingValues") && schema["missingValues"].is_array()) {
      missing_values = schema["missingValues"].get<std::vector<std::string>>();
    }

    const auto csv_path = base / table.path;
    if (!std::filesystem::exists(csv_path)) throw Error(ErrorCode::MissingResource, "resource file not found", csv_path.string());
    auto raw = csv::parse(read_file(csv_path), table.path);
    table.line_terminator = raw.line_terminator;
    if (raw.header != table.field_names()) {
      throw Error(ErrorCode::SchemaViolation, "CSV header does not match schema field order", table.path);
    }
    table.rows.reserve(raw.rows.size());
    for (std::size_t i = 0; i < raw.rows.size(); ++i) {
      std::vector<Cell> row;
      row.reserve(table.fields.size());
      for (std::size_t c = 0; c < table.fields.size(); ++c) {
        const auto& text = raw.rows[i][c];
        const std::string locus = table.name + "/row " + std::to_string(i + 1) + "/" + table.fields[c].name;
        if (std::find(missing_values.begin(), missing_values.end(), text) != missing_values.end()) {
          row.emplace_back(std::monostate{});
          continue;
        }
        Cell cell = parse_cell(table.fields[c], text, locus);
        check_constraints(table.fields[c], cell, locus);
        row.push_back(std::move(cell));
      }
      table.rows.push_back(std::move(row));
    }
    table.raw_rows = std::move(raw.rows);

    if (!table.primary_key.empty()) {
      auto cols = table.columns_of(table.primary_key);
      std::unordered_set<Key, KeyHash> keys;
      keys.reserve(table.rows.size());
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        Key k = table.key_of(i, cols);
        if (std::any_of(k.begin(), k.end(), [](const Cell& c) { return is_null(c); })) {
          throw Error(ErrorCode::SchemaViolation, "null primary key", table.name + "/row " + std::to_string(i + 1));
        }
        if (!keys.insert(std::move(k)).second) {
          throw Error(ErrorCode::DuplicatePrimaryKey, "primary key repeats", table.name + "/row " + std::to_string(i + 1));
        }
      }
      for (auto c : cols) table.fields[c].kind = FieldKind::identifier;
    }
    pkg.entities.push_back(std::move(table));
  }

  for (std::size_t e = 0; e < pkg.entities.size(); ++e) {
    for (auto& fk : pending[e]) {
      auto& from = pkg.entities[e];
      const std::string target_name = fk.resource.empty() ? from.name : fk.resource;
      auto to = std::find_if(pkg.entities.begin(), pkg.entities.end(),
                             [&](const EntityTable& t) { return t.name == target_name; });
      if (to == pkg.entities.end()) throw Error(ErrorCode::DanglingForeignKey, "reference names unknown entity '" + target_name + "'", fk.locus);
      if (fk.fields.empty() || fk.fields.size() != fk.reference_fields.size()) {
        throw Error(ErrorCode::DanglingForeignKey, "foreign key field lists differ in length", fk.locus);
      }
      for (const auto& f : fk.fields) {
        if (!from.field_index(f)) throw Error(ErrorCode::DanglingForeignKey, "unknown field '" + f + "'", fk.locus);
      }
      for (const auto& f : fk.reference_fields) {
        if (!to->field_index(f)) {
          throw Error(ErrorCode::DanglingForeignKey, "unknown referenced field '" + target_name + "." + f + "'", fk.locus);
        }
        if (std::find(to->primary_key.begin(), to->primary_key.end(), f) == to->primary_key.end()) {
          throw Error(ErrorCode::DanglingForeignKey, "referenced field '" + f + "' is not part of the primary key", fk.locus);
        }
      }
      for (const auto& f : fk.fields) from.fields[*from.field_index(f)].kind = FieldKind::identifier;
      pkg.relations.push_back(Relationship{from.name, fk.fields, target_name, fk.reference_fields});
    }
  }
  return pkg;
}

FieldStats profile_field(const EntityTable& table, std::size_t column) {
  const auto& schema = table.fields.at(column);
  FieldStats stats;
  stats.entity = table.name;
  stats.field = schema.name;
  stats.kind = schema.kind;
  std::map<Cell, std::size_t, decltype([](const Cell& a, const Cell& b) { return compare_cells(a, b) < 0; })> tally;
  for (const auto& row : table.rows) {
    const Cell& cell = row[column];
    if (is_null(cell)) {
      ++stats.null_count;
      continue;
    }
    if (const auto* d = std::get_if<double>(&cell)) {
      stats.observed_min = stats.observed_min ? std::min(*stats.observed_min, *d) : *d;
      stats.observed_max = stats.observed_max ? std::max(*stats.observed_max, *d) : *d;
    }
    ++tally[cell];
  }
  stats.distinct_count = tally.size();
  if (schema.kind != FieldKind::quantitative) {
    stats.categories.assign(tally.begin(), tally.end());
  }
  return stats;
}

std::vector<FieldStats> field_profile(const Package& package, std::string_view entity) {
  const auto& table = package.entity(entity);
  std::vector<FieldStats> out;
  for (std::size_t c = 0; c < table.fields.size(); ++c) {
    if (table.fields[c].kind == FieldKind::identifier) continue;
    out.push_back(profile_field(table, c));
  }
  return out;
}

std::optional<RelationMatch> relation_between(const Package& package, std::string_view a, std::string_view b) {
  package.entity(a);
  package.entity(b);
  if (a == b) return std::nullopt;
  std::optional<RelationMatch> found;
  for (const auto& rel : package.relations) {
    const bool fwd = rel.from_entity == a && rel.to_entity == b;
    const bool rev = rel.from_entity == b && rel.to_entity == a;
    if (!fwd && !rev) continue;
    if (found && !(found->relationship == rel)) {
      throw Error(ErrorCode::AmbiguousRelation,
                  "more than one direct foreign key links '" + std::string(a) + "' and '" + std::string(b) + "'");
    }
    found = RelationMatch{rel, fwd};
  }
  return found;
}

}  // namespace vizlink
