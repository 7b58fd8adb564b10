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

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizlink/datapackage.hpp"
#include "vizlink/error.hpp"
#include "vizlink/value.hpp"

namespace vizlink {

/// Version of the published grammar schema document.
inline constexpr int kGrammarVersion = 1;

struct SourceRef {
  std::string alias;
  std::string entity;
  bool operator==(const SourceRef&) const = default;
};

/// How a selection on one entity restricts a directly related entity.
enum class LinkMode { any, all };

std::string_view to_string(LinkMode mode) noexcept;

struct Predicate {
  enum class Op { in, range, notnull, isnull };
  std::string field;
  Op op = Op::notnull;
  std::vector<Cell> values;  // in
  std::optional<double> min;  // range
  std::optional<double> max;  // range
  bool operator==(const Predicate&) const = default;
};

/// Named filter: keeps rows admitted by a registry selection.
struct SelectionFilter {
  std::string selection;
  /// Present when the selection lives on a different, directly related entity.
  std::optional<Relationship> via;
  LinkMode mode = LinkMode::any;
  /// Set on filters added by linking; those are rebuilt on every injection.
  bool injected = false;
  bool operator==(const SelectionFilter&) const = default;
};

struct PredicateFilter {
  Predicate predicate;
  bool operator==(const PredicateFilter&) const = default;
};

struct Groupby {
  std::vector<std::string> fields;
  bool operator==(const Groupby&) const = default;
};

enum class AggregateOp { count, mean, sum, min, max };

std::string_view to_string(AggregateOp op) noexcept;

struct Rollup {
  std::string out_field;
  AggregateOp op = AggregateOp::count;
  std::optional<std::string> in_field;
  bool operator==(const Rollup&) const = default;
};

/// Sorts by a quantitative field and appends the running fraction of rows.
struct Cdf {
  std::string field;
  std::string out_fraction;
  bool operator==(const Cdf&) const = default;
};

struct Join {
  std::string left_alias;
  std::string right_alias;
  Relationship via;
  bool operator==(const Join&) const = default;
};

enum class SortDirection { ascending, descending };

struct Orderby {
  std::string field;
  SortDirection direction = SortDirection::ascending;
  bool operator==(const Orderby&) const = default;
};

using Transform = std::variant<SelectionFilter, PredicateFilter, Groupby, Rollup, Cdf, Join, Orderby>;

enum class Mark { bar, point, line, row };
enum class Channel { x, y, color };
enum class Stack { none, stacked, normalized };

std::string_view to_string(Mark mark) noexcept;
std::string_view to_string(Channel channel) noexcept;

struct Encoding {
  Channel channel = Channel::x;
  std::string field;
  FieldKind field_kind = FieldKind::nominal;
  std::optional<Stack> stack;
  bool operator==(const Encoding&) const = default;
};

struct Representation {
  Mark mark = Mark::row;
  std::vector<Encoding> mapping;
  bool operator==(const Representation&) const = default;

  const Encoding* find(Channel channel) const noexcept;
};

enum class SelectionKind { point, interval };

std::string_view to_string(SelectionKind kind) noexcept;

/// Geometry of a brush a chart supports.
enum class BrushGeometry { x_interval, y_interval, xy_interval, point };

std::string_view to_string(BrushGeometry geometry) noexcept;

struct SelectionDecl {
  std::string name;
  SelectionKind kind = SelectionKind::interval;
  std::string entity;
  std::vector<std::string> fields;
  /// Set on the single brush-derived selection of a chart.
  std::optional<BrushGeometry> brush;
  std::optional<Relationship> mapping;
  bool operator==(const SelectionDecl&) const = default;
};

struct VizSpec {
  std::vector<SourceRef> sources;
  std::vector<Transform> transforms;
  std::optional<Representation> representation;
  std::vector<SelectionDecl> selections;
  bool operator==(const VizSpec&) const = default;

  /// Entity of the first source; the rows every row-level transform operates on.
  const std::string& primary_entity() const { return sources.front().entity; }
  const SourceRef* find_source(std::string_view alias) const noexcept;
  const SelectionDecl* brush_selection() const noexcept;
};

/// Parses the canonical JSON shape. Throws Error(MalformedDocument | UnknownTransformKind |
/// UnknownChannel | UnknownMark | DuplicateAlias | DuplicateChannel).
VizSpec parse_spec(const nlohmann::json& document);
VizSpec parse_spec(std::string_view text);

nlohmann::json to_json(const VizSpec& spec);
nlohmann::json to_json(const Transform& transform);

/// The machine-readable grammar schema used for agent structured output.
const nlohmann::json& grammar_schema();

struct Violation {
  ErrorCode code;
  std::string locus;
  std::string reason;
  bool operator==(const Violation&) const = default;
};

/// Output column of a spec, as computed by walking its transforms.
struct ColumnInfo {
  std::string name;
  FieldKind kind = FieldKind::nominal;
  /// True for columns taken from the primary entity (not produced by a rollup or cdf).
  bool source_field = false;
  bool operator==(const ColumnInfo&) const = default;
};

/// Empty iff every entity/field reference resolves with compatible kinds.
std::vector<Violation> validate_spec(const VizSpec& spec, const Package& package);

/// Columns the transform chain produces. Throws Error with the first violation's code if invalid.
std::vector<ColumnInfo> output_columns(const VizSpec& spec, const Package& package);

/// Attaches the tabular representation when none is present.
VizSpec default_representation(VizSpec spec);

}  // namespace vizlink
