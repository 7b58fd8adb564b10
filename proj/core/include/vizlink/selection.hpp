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

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizlink/datapackage.hpp"
#include "vizlink/grammar.hpp"
#include "vizlink/value.hpp"

namespace vizlink {

/// Closed range; an absent bound is open. A field with both bounds open admits every row, nulls included.
struct Interval {
  std::optional<double> min;
  std::optional<double> max;
  bool operator==(const Interval&) const = default;

  bool unbounded() const noexcept { return !min && !max; }
  bool admits(const Cell& cell) const noexcept;
};

/// A named point or interval choice over fields of one entity.
struct Selection {
  std::string name;
  SelectionKind kind = SelectionKind::interval;
  std::string entity;
  std::vector<std::string> fields;
  /// Point payload: admitted value tuples, sorted and unique. Null cells match null values.
  std::vector<Key> points;
  /// Interval payload: one range per field.
  std::vector<Interval> intervals;

  bool operator==(const Selection&) const = default;
};

/// Selections keyed by their shared name.
using SelectionRegistry = std::map<std::string, Selection>;

using RowMask = std::vector<bool>;

/// Sorts and deduplicates point tuples so equal payloads compare equal.
void canonicalize(Selection& selection);

/// Rows of the table admitted by the selection, judged on the selection's own fields only.
RowMask selection_mask(const Selection& selection, const EntityTable& table);

/// Selection contents without its identity: ranges by field, or admitted value tuples.
using Payload = std::variant<std::map<std::string, Interval>, std::vector<Key>>;

Payload payload_of(const Selection& selection);
/// Replaces the payload of a selection. Throws Error(MalformedDocument | UnknownField | KindMismatch).
void apply_payload(Selection& selection, const Payload& payload);

/// {"intervals": {field: [min|null, max|null]}} or {"values": [[...], ...]}.
nlohmann::json to_json(const Payload& payload);
Payload payload_from_json(const nlohmann::json& doc);

nlohmann::json payload_to_json(const Selection& selection);
void apply_payload_json(Selection& selection, const nlohmann::json& payload);

nlohmann::json to_json(const Selection& selection);
Selection selection_from_json(const nlohmann::json& doc);

}  // namespace vizlink
