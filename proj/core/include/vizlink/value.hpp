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
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace vizlink {

enum class FieldKind { quantitative, nominal, ordinal, identifier };

std::string_view to_string(FieldKind kind) noexcept;
std::optional<FieldKind> field_kind_from_string(std::string_view text) noexcept;

inline bool is_categorical(FieldKind kind) noexcept {
  return kind == FieldKind::nominal || kind == FieldKind::ordinal;
}

/// A typed table cell. Quantitative values are finite doubles; everything else is text.
using Cell = std::variant<std::monostate, double, std::string>;

/// A tuple of cells, used for primary/foreign keys and group keys.
using Key = std::vector<Cell>;

inline bool is_null(const Cell& cell) noexcept { return std::holds_alternative<std::monostate>(cell); }

/// Total order over cells: numbers ascending, then text ascending, null last.
int compare_cells(const Cell& a, const Cell& b) noexcept;
int compare_keys(const Key& a, const Key& b) noexcept;

struct KeyHash {
  std::size_t operator()(const Key& key) const noexcept;
};

/// Shortest text that round-trips the double ("3750", "39.1").
std::string format_number(double value);

/// Display text for a cell; null renders as "(null)".
std::string display_text(const Cell& cell);

nlohmann::json cell_to_json(const Cell& cell);
Cell cell_from_json(const nlohmann::json& value);

}  // namespace vizlink
