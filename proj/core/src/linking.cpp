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

#include "vizlink/linking.hpp"

#include <algorithm>
#include <set>

#include "vizlink/error.hpp"

namespace vizlink {

namespace {

/// Names of columns a transform chain creates rather than reads from the source.
std::set<std::string> derived_fields(const VizSpec& spec) {
  std::set<std::string> out;
  for (const auto& t : spec.transforms) {
    if (const auto* r = std::get_if<Rollup>(&t)) out.insert(r->out_field);
    if (const auto* c = std::get_if<Cdf>(&t)) out.insert(c->out_fraction);
    if (const auto* j = std::get_if<Join>(&t)) {
      // joined columns are "alias.field"; anything with that prefix is derived
      out.insert(j->right_alias + ".");
    }
  }
  return out;
}

bool is_source_field(const std::string& field, const std::set<std::string>& derived) {
  if (derived.contains(field)) return false;
  for (const auto& d : derived) {
    if (!d.empty() && d.back() == '.' && field.starts_with(d)) return false;
  }
  return true;
}

}  // namespace

std::optional<DerivedBrush> derive_brush(const VizSpec& spec) {
  if (!spec.representation || spec.representation->mark == Mark::row) return std::nullopt;
  const auto derived = derived_fields(spec);
  const auto& rep = *spec.representation;

  auto source_enc = [&](Channel ch) -> const Encoding* {
    const auto* e = rep.find(ch);
    return e && is_source_field(e->field, derived) ? e : nullptr;
  };
  const auto* x = source_enc(Channel::x);
  const auto* y = source_enc(Channel::y);
  const auto* color = source_enc(Channel::color);

  const bool qx = x && x->field_kind == FieldKind::quantitative;
  const bool qy = y && y->field_kind == FieldKind::quantitative;
  if (qx && qy && x->field != y->field) return DerivedBrush{BrushGeometry::xy_interval, {x->field, y->field}};
  if (qx) return DerivedBrush{BrushGeometry::x_interval, {x->field}};
  if (qy) return DerivedBrush{BrushGeometry::y_interval, {y->field}};

  std::vector<std::string> fields;
  for (const auto* e : {x, y, color}) {
    if (e && is_categorical(e->field_kind) &&
        std::find(fields.begin(), fields.end(), e->field) == fields.end()) {
      fields.push_back(e->field);
    }
  }
  if (!fields.empty()) return DerivedBrush{BrushGeometry::point, std::move(fields)};
  return std::nullopt;
}

VizSpec attach_brush(VizSpec spec, const std::string& selection_name, const DerivedBrush& brush) {
  std::erase_if(spec.selections, [](const SelectionDecl& d) { return d.brush.has_value(); });
  SelectionDecl decl;
  decl.name = selection_name;
  decl.kind = brush.kind();
  decl.entity = spec.primary_entity();
  decl.fields = brush.fields;
  decl.brush = brush.geometry;
  spec.selections.push_back(std::move(decl));
  return spec;
}

std::optional<SelectionFilter> applicable_filter(const Package& package, const Selection& selection,
                                                 std::string_view entity, LinkMode mode) {
  if (selection.entity == entity) return SelectionFilter{selection.name, std::nullopt, LinkMode::any, true};
  if (!package.find_entity(selection.entity) || !package.find_entity(entity)) return std::nullopt;
  try {
    auto match = relation_between(package, selection.entity, entity);
    if (!match) return std::nullopt;
    return SelectionFilter{selection.name, match->relationship, mode, true};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::AmbiguousRelation) return std::nullopt;
    throw;
  }
}

VizSpec inject_filters(VizSpec spec, const SelectionRegistry& registry, const Package& package, LinkMode mode) {
  std::erase_if(spec.transforms, [](const Transform& t) {
    const auto* f = std::get_if<SelectionFilter>(&t);
    return f && f->injected;
  });
  const auto* own = spec.brush_selection();
  const std::string own_name = own ? own->name : std::string{};
  std::vector<Transform> prefix;
  for (const auto& [name, selection] : registry) {
    if (name == own_name) continue;
    if (auto filter = applicable_filter(package, selection, spec.primary_entity(), mode)) prefix.emplace_back(*filter);
  }
  spec.transforms.insert(spec.transforms.begin(), prefix.begin(), prefix.end());
  return spec;
}

SelectionRegistry update_selection(SelectionRegistry registry, Selection selection, const Package& package) {
  const auto& table = package.entity(selection.entity);
  if (selection.name.empty()) throw Error(ErrorCode::InvalidAction, "selection needs a name");
  if (selection.fields.empty()) throw Error(ErrorCode::UnknownField, "selection needs at least one field", selection.name);
  for (const auto& f : selection.fields) {
    const auto* field = table.find_field(f);
    if (!field) {
      throw Error(ErrorCode::UnknownField, "entity '" + selection.entity + "' has no field '" + f + "'", selection.name);
    }
    if (selection.kind == SelectionKind::interval && field->kind != FieldKind::quantitative) {
      throw Error(ErrorCode::KindMismatch, "interval selections need quantitative fields", selection.name + "/" + f);
    }
    if (selection.kind == SelectionKind::point && !is_categorical(field->kind)) {
      throw Error(ErrorCode::KindMismatch, "point selections need nominal or ordinal fields", selection.name + "/" + f);
    }
  }
  if (selection.kind == SelectionKind::interval) {
    if (selection.intervals.size() != selection.fields.size()) {
      throw Error(ErrorCode::InvalidInterval, "one interval per field required", selection.name);
    }
    for (const auto& iv : selection.intervals) {
      if (iv.min && iv.max && *iv.min > *iv.max) {
        throw Error(ErrorCode::InvalidInterval,
                    "interval [" + format_number(*iv.min) + ", " + format_number(*iv.max) + "] has min > max",
                    selection.name);
      }
    }
    selection.points.clear();
  } else {
    for (const auto& p : selection.points) {
      if (p.size() != selection.fields.size()) {
        throw Error(ErrorCode::KindMismatch, "point tuple arity differs from the selection's fields", selection.name);
      }
      for (const auto& c : p) {
        if (std::holds_alternative<double>(c)) {
          throw Error(ErrorCode::KindMismatch, "point values must be categories or null", selection.name);
        }
      }
    }
    selection.intervals.clear();
    canonicalize(selection);
  }
  auto name = selection.name;
  registry.insert_or_assign(std::move(name), std::move(selection));
  return registry;
}

RowMask surviving_rows(const Package& package, const SelectionRegistry& registry, std::string_view entity,
                       LinkMode mode) {
  const auto& table = package.entity(entity);
  RowMask mask(table.row_count(), true);
  for (const auto& [name, selection] : registry) {
    auto filter = applicable_filter(package, selection, entity, mode);
    if (!filter) continue;
    const RowMask m = named_filter_mask(package, registry, *filter, entity);
    for (std::size_t r = 0; r < mask.size(); ++r) mask[r] = mask[r] && m[r];
  }
  return mask;
}

std::map<std::string, std::size_t> entity_counts(const Package& package, const SelectionRegistry& registry,
                                                 LinkMode mode) {
  std::map<std::string, std::size_t> out;
  for (const auto& e : package.entities) {
    const auto mask = surviving_rows(package, registry, e.name, mode);
    out[e.name] = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  }
  return out;
}

}  // namespace vizlink
