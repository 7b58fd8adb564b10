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
#include <string_view>
#include <vector>

#include "vizlink/dataflow.hpp"
#include "vizlink/datapackage.hpp"
#include "vizlink/grammar.hpp"
#include "vizlink/selection.hpp"

namespace vizlink {

/// Brush a chart supports: its geometry and the source fields it selects on.
struct DerivedBrush {
  BrushGeometry geometry = BrushGeometry::x_interval;
  std::vector<std::string> fields;
  bool operator==(const DerivedBrush&) const = default;

  SelectionKind kind() const noexcept {
    return geometry == BrushGeometry::point ? SelectionKind::point : SelectionKind::interval;
  }
};

struct BrushBinding {
  std::string viz_id;
  std::string selection;
  DerivedBrush brush;
  bool operator==(const BrushBinding&) const = default;
};

/// Chooses a chart's brush from its encodings. Only fields that exist in the source data count;
/// fields produced by rollup, cdf, or join are ignored.
///   - quantitative source fields on x and y: 2D interval
///   - a quantitative source field on exactly one of x/y: 1D interval on that axis
///   - otherwise nominal/ordinal source fields on x, y, or color: point selection on all of them
///   - otherwise (and for row marks): none
std::optional<DerivedBrush> derive_brush(const VizSpec& spec);

/// Records the brush on the spec as its single brush-derived selection declaration.
VizSpec attach_brush(VizSpec spec, const std::string& selection_name, const DerivedBrush& brush);

/// How a selection reaches a given entity: directly, through one foreign key, or not at all.
/// `mode` decides how a one-hop selection is propagated; sessions use LinkMode::any.
std::optional<SelectionFilter> applicable_filter(const Package& package, const Selection& selection,
                                                 std::string_view entity, LinkMode mode = LinkMode::any);

/// Rebuilds the named-filter prefix of a spec from the registry. A chart's own brush selection
/// is never applied to itself. Idempotent.
VizSpec inject_filters(VizSpec spec, const SelectionRegistry& registry, const Package& package,
                       LinkMode mode = LinkMode::any);

/// Checks a selection against the package and stores it under its name.
/// Throws Error(UnknownEntity | UnknownField | KindMismatch | InvalidInterval).
SelectionRegistry update_selection(SelectionRegistry registry, Selection selection, const Package& package);

/// Rows of an entity surviving every applicable selection.
RowMask surviving_rows(const Package& package, const SelectionRegistry& registry, std::string_view entity,
                       LinkMode mode = LinkMode::any);

/// Per entity, the number of records surviving every applicable selection.
std::map<std::string, std::size_t> entity_counts(const Package& package, const SelectionRegistry& registry,
                                                 LinkMode mode = LinkMode::any);

}  // namespace vizlink
