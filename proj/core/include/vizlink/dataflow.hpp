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
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizlink/datapackage.hpp"
#include "vizlink/grammar.hpp"
#include "vizlink/selection.hpp"

namespace vizlink {

struct ResultTable {
  std::vector<ColumnInfo> columns;
  std::vector<std::vector<Cell>> rows;
  /// Primary key of the source row behind each output row; present for row-level results only.
  std::optional<std::vector<Key>> provenance;

  bool operator==(const ResultTable&) const = default;
  std::optional<std::size_t> column_index(std::string_view name) const noexcept;
};

/// {"columns": [{"name", "kind"}], "rows": [[...]], "provenance"?: [[...]]}
nlohmann::json to_json(const ResultTable& table);

/// Rows of the other endpoint of `relationship` related to the selected rows of `selection_entity`.
/// any: at least one related record is selected (rows with none are dropped).
/// all: every related record is selected (rows with none are kept).
RowMask cross_entity_membership(const Package& package, const Relationship& relationship, LinkMode mode,
                                std::string_view selection_entity, const RowMask& selected);

/// Rows of `target_entity` admitted by a named filter. Throws Error(UnresolvedSelection | JoinKeyMismatch).
RowMask named_filter_mask(const Package& package, const SelectionRegistry& registry, const SelectionFilter& filter,
                          std::string_view target_entity);

/// Runs the transform chain in order against the package. Throws Error(UnresolvedSelection |
/// JoinKeyMismatch | EmptyGroupby | UnresolvedField | KindMismatch | InvalidTransform).
ResultTable execute(const VizSpec& spec, const Package& package, const SelectionRegistry& registry);

}  // namespace vizlink
