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

#include "vizlink/dataflow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "plan.hpp"
#include "vizlink/error.hpp"

namespace vizlink {

using nlohmann::json;

std::optional<std::size_t> ResultTable::column_index(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

json to_json(const ResultTable& table) {
  json columns = json::array();
  for (const auto& c : table.columns) {
    columns.push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}, {"source", c.source_field}});
  }
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = json::array();
    for (const auto& c : row) r.push_back(cell_to_json(c));
    rows.push_back(std::move(r));
  }
  json doc{{"columns", std::move(columns)}, {"rows", std::move(rows)}};
  if (table.provenance) {
    json prov = json::array();
    for (const auto& key : *table.provenance) {
      json k = json::array();
      for (const auto& c : key) k.push_back(cell_to_json(c));
      prov.push_back(std::move(k));
    }
    doc["provenance"] = std::move(prov);
  }
  return doc;
}

RowMask cross_entity_membership(const Package& package, const Relationship& relationship, LinkMode mode,
                                std::string_view selection_entity, const RowMask& selected) {
  if (relationship.from_entity == relationship.to_entity) {
    throw Error(ErrorCode::JoinKeyMismatch, "self-referencing relationships do not link entities");
  }
  const bool selection_is_child = relationship.from_entity == selection_entity;
  if (!selection_is_child && relationship.to_entity != selection_entity) {
    throw Error(ErrorCode::JoinKeyMismatch, "relationship does not touch '" + std::string(selection_entity) + "'");
  }
  const auto& child = package.entity(relationship.from_entity);
  const auto& parent = package.entity(relationship.to_entity);
  const auto child_cols = child.columns_of(relationship.from_fields);
  const auto parent_cols = parent.columns_of(relationship.to_fields);

  auto has_null = [](const Key& k) { return std::any_of(k.begin(), k.end(), [](const Cell& c) { return is_null(c); }); };

  // Per key: how many related rows exist on the selection side, and how many of them are selected.
  struct Tally {
    std::size_t related = 0;
    std::size_t selected = 0;
  };
  const auto& sel_table = selection_is_child ? child : parent;
  const auto& sel_cols = selection_is_child ? child_cols : parent_cols;
  const auto& tgt_table = selection_is_child ? parent : child;
  const auto& tgt_cols = selection_is_child ? parent_cols : child_cols;

  std::unordered_map<Key, Tally, KeyHash> tally;
  for (std::size_t r = 0; r < sel_table.row_count(); ++r) {
    Key k = sel_table.key_of(r, sel_cols);
    if (has_null(k)) continue;
    auto& t = tally[std::move(k)];
    ++t.related;
    if (selected[r]) ++t.selected;
  }

  RowMask out(tgt_table.row_count(), false);
  for (std::size_t r = 0; r < tgt_table.row_count(); ++r) {
    Key k = tgt_table.key_of(r, tgt_cols);
    Tally t;
    if (!has_null(k)) {
      if (auto it = tally.find(k); it != tally.end()) t = it->second;
    }
    out[r] = mode == LinkMode::any ? t.selected > 0 : t.selected == t.related;
  }
  return out;
}

RowMask named_filter_mask(const Package& package, const SelectionRegistry& registry, const SelectionFilter& filter,
                          std::string_view target_entity) {
  auto it = registry.find(filter.selection);
  if (it == registry.end()) {
    throw Error(ErrorCode::UnresolvedSelection, "no selection named '" + filter.selection + "'", filter.selection);
  }
  const auto& selection = it->second;
  const auto& source = package.entity(selection.entity);
  RowMask mask = selection_mask(selection, source);
  if (selection.entity == target_entity) return mask;

  std::optional<Relationship> via = filter.via;
  if (!via) {
    auto match = relation_between(package, selection.entity, target_entity);
    if (!match) {
      throw Error(ErrorCode::JoinKeyMismatch,
                  "'" + selection.entity + "' is not directly related to '" + std::string(target_entity) + "'",
                  filter.selection);
    }
    via = match->relationship;
  }
  if (!via->touches(selection.entity) || !via->touches(target_entity)) {
    throw Error(ErrorCode::JoinKeyMismatch, "filter relationship does not link the selection to its target",
                filter.selection);
  }
  return cross_entity_membership(package, *via, filter.mode, selection.entity, mask);
}

namespace {

struct Work {
  std::vector<ColumnInfo> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::size_t> source_rows;  // parallel to rows while row_level
  bool row_level = true;

  std::size_t column(std::string_view name, const std::string& locus) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == name) return i;
    }
    throw Error(ErrorCode::UnresolvedField, "no column '" + std::string(name) + "' at this point", locus);
  }
  std::vector<std::size_t> columns_for(const std::vector<std::string>& names, const std::string& locus) const {
    std::vector<std::size_t> out;
    for (const auto& n : names) out.push_back(column(n, locus));
    return out;
  }
  void keep(const std::vector<bool>& keep_row) {
    std::size_t w = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!keep_row[r]) continue;
      if (w != r) {
        rows[w] = std::move(rows[r]);
        if (row_level) source_rows[w] = source_rows[r];
      }
      ++w;
    }
    rows.resize(w);
    if (row_level) source_rows.resize(w);
  }
};

Key key_from(const std::vector<Cell>& row, const std::vector<std::size_t>& cols) {
  Key k;
  k.reserve(cols.size());
  for (auto c : cols) k.push_back(row[c]);
  return k;
}

Key source_key(const EntityTable& table, std::size_t row) {
  if (table.primary_key.empty()) return Key{static_cast<double>(row)};
  return table.key_of(row, table.columns_of(table.primary_key));
}

bool predicate_admits(const Predicate& p, const Cell& cell) {
  switch (p.op) {
    case Predicate::Op::notnull: return !is_null(cell);
    case Predicate::Op::isnull: return is_null(cell);
    case Predicate::Op::range: {
      const auto* d = std::get_if<double>(&cell);
      return d && (!p.min || *d >= *p.min) && (!p.max || *d <= *p.max);
    }
    case Predicate::Op::in:
      return std::any_of(p.values.begin(), p.values.end(), [&](const Cell& v) { return compare_cells(v, cell) == 0; });
  }
  return false;
}

struct Accumulator {
  std::size_t rows = 0;
  std::size_t values = 0;
  double sum = 0.0;
  double min = 0.0;
  double max = 0.0;

  void add(const Cell* cell) {
    ++rows;
    if (!cell) return;
    const auto* d = std::get_if<double>(cell);
    if (!d) return;
    if (values == 0) {
      min = max = *d;
    } else {
      min = std::min(min, *d);
      max = std::max(max, *d);
    }
    sum += *d;
    ++values;
  }
  Cell result(AggregateOp op) const {
    switch (op) {
      case AggregateOp::count: return static_cast<double>(rows);
      case AggregateOp::sum: return sum;
      case AggregateOp::mean: return values ? Cell(sum / static_cast<double>(values)) : Cell(std::monostate{});
      case AggregateOp::min: return values ? Cell(min) : Cell(std::monostate{});
      case AggregateOp::max: return values ? Cell(max) : Cell(std::monostate{});
    }
    return std::monostate{};
  }
};

void aggregate(Work& work, const std::vector<std::string>& keys, const std::vector<Rollup>& rollups,
               const std::string& locus) {
  const auto key_cols = work.columns_for(keys, locus);
  std::vector<std::optional<std::size_t>> in_cols;
  for (const auto& r : rollups) {
    if (!r.in_field) {
      in_cols.emplace_back();
      continue;
    }
    auto c = work.column(*r.in_field, locus);
    if (work.columns[c].kind != FieldKind::quantitative) {
      throw Error(ErrorCode::KindMismatch, "aggregate needs a quantitative field", locus);
    }
    in_cols.emplace_back(c);
  }

  std::unordered_map<Key, std::size_t, KeyHash> index;
  std::vector<Key> group_keys;
  std::vector<std::vector<Accumulator>> acc;
  if (keys.empty()) {
    group_keys.emplace_back();
    acc.emplace_back(rollups.size());
  }
  for (const auto& row : work.rows) {
    std::size_t g = 0;
    if (!keys.empty()) {
      Key k = key_from(row, key_cols);
      auto [it, inserted] = index.try_emplace(k, group_keys.size());
      if (inserted) {
        group_keys.push_back(std::move(k));
        acc.emplace_back(rollups.size());
      }
      g = it->second;
    }
    for (std::size_t i = 0; i < rollups.size(); ++i) acc[g][i].add(in_cols[i] ? &row[*in_cols[i]] : nullptr);
  }

  std::vector<std::size_t> order(group_keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return compare_keys(group_keys[a], group_keys[b]) < 0; });

  std::vector<ColumnInfo> columns;
  for (auto c : key_cols) columns.push_back(work.columns[c]);
  for (const auto& r : rollups) columns.push_back({r.out_field, FieldKind::quantitative, false});
  std::vector<std::vector<Cell>> rows;
  rows.reserve(order.size());
  for (auto g : order) {
    std::vector<Cell> row = group_keys[g];
    for (std::size_t i = 0; i < rollups.size(); ++i) row.push_back(acc[g][i].result(rollups[i].op));
    rows.push_back(std::move(row));
  }
  work.columns = std::move(columns);
  work.rows = std::move(rows);
  work.source_rows.clear();
  work.row_level = false;
}

void distinct(Work& work, const std::vector<std::string>& keys, const std::string& locus) {
  const auto key_cols = work.columns_for(keys, locus);
  std::vector<Key> unique_keys;
  {
    std::unordered_map<Key, bool, KeyHash> seen;
    for (const auto& row : work.rows) {
      Key k = key_from(row, key_cols);
      if (seen.try_emplace(k, true).second) unique_keys.push_back(std::move(k));
    }
  }
  std::sort(unique_keys.begin(), unique_keys.end(), [](const Key& a, const Key& b) { return compare_keys(a, b) < 0; });
  std::vector<ColumnInfo> columns;
  for (auto c : key_cols) columns.push_back(work.columns[c]);
  work.columns = std::move(columns);
  work.rows.assign(unique_keys.begin(), unique_keys.end());
  work.source_rows.clear();
  work.row_level = false;
}

void cdf(Work& work, const EntityTable& primary, const detail::PartitionedCdf& step, const std::string& locus) {
  if (!work.row_level) throw Error(ErrorCode::InvalidTransform, "cdf applies to row-level tables only", locus);
  const auto value_col = work.column(step.cdf.field, locus);
  if (work.columns[value_col].kind != FieldKind::quantitative) {
    throw Error(ErrorCode::KindMismatch, "cdf needs a quantitative field", locus);
  }
  for (const auto& c : work.columns) {
    if (c.name == step.cdf.out_fraction) {
      throw Error(ErrorCode::InvalidTransform, "output column '" + c.name + "' already exists", locus);
    }
  }
  const auto key_cols = work.columns_for(step.keys, locus);

  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < work.rows.size(); ++r) {
    if (!is_null(work.rows[r][value_col])) order.push_back(r);
  }
  std::vector<Key> pks(work.rows.size());
  for (auto r : order) pks[r] = source_key(primary, work.source_rows[r]);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (int c = compare_keys(key_from(work.rows[a], key_cols), key_from(work.rows[b], key_cols)); c != 0) return c < 0;
    if (int c = compare_cells(work.rows[a][value_col], work.rows[b][value_col]); c != 0) return c < 0;
    return compare_keys(pks[a], pks[b]) < 0;
  });

  std::vector<std::vector<Cell>> rows;
  std::vector<std::size_t> sources;
  rows.reserve(order.size());
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin + 1;
    const Key group = key_from(work.rows[order[begin]], key_cols);
    while (end < order.size() && compare_keys(key_from(work.rows[order[end]], key_cols), group) == 0) ++end;
    const std::size_t n = end - begin;
    for (std::size_t i = begin; i < end; ++i) {
      std::vector<Cell> row = std::move(work.rows[order[i]]);
      row.emplace_back(static_cast<double>(i - begin + 1) / static_cast<double>(n));
      rows.push_back(std::move(row));
      sources.push_back(work.source_rows[order[i]]);
    }
    begin = end;
  }
  work.columns.push_back({step.cdf.out_fraction, FieldKind::quantitative, false});
  work.rows = std::move(rows);
  work.source_rows = std::move(sources);
}

void join(Work& work, const VizSpec& spec, const Package& package, const Join& step, const std::string& locus) {
  const auto* left = spec.find_source(step.left_alias);
  const auto* right = spec.find_source(step.right_alias);
  if (!left || !right || left != &spec.sources.front()) {
    throw Error(ErrorCode::InvalidTransform, "join must run from the primary source to another source", locus);
  }
  if (!work.row_level) throw Error(ErrorCode::InvalidTransform, "join applies to row-level tables only", locus);
  const auto& via = step.via;
  const bool left_is_child = via.from_entity == left->entity && via.to_entity == right->entity;
  const bool left_is_parent = via.to_entity == left->entity && via.from_entity == right->entity;
  if ((!left_is_child && !left_is_parent) || left->entity == right->entity ||
      std::find(package.relations.begin(), package.relations.end(), via) == package.relations.end()) {
    throw Error(ErrorCode::JoinKeyMismatch, "relationship does not link the joined aliases", locus);
  }
  const auto& lt = package.entity(left->entity);
  const auto& rt = package.entity(right->entity);
  const auto lcols = lt.columns_of(left_is_child ? via.from_fields : via.to_fields);
  const auto rcols = rt.columns_of(left_is_child ? via.to_fields : via.from_fields);

  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> right_index;
  for (std::size_t r = 0; r < rt.row_count(); ++r) right_index[rt.key_of(r, rcols)].push_back(r);

  std::vector<std::vector<Cell>> rows;
  std::vector<std::size_t> sources;
  const std::vector<Cell> nulls(rt.fields.size());
  for (std::size_t i = 0; i < work.rows.size(); ++i) {
    Key k = lt.key_of(work.source_rows[i], lcols);
    const bool null_key = std::any_of(k.begin(), k.end(), [](const Cell& c) { return is_null(c); });
    auto it = null_key ? right_index.end() : right_index.find(k);
    if (it == right_index.end()) {
      auto row = work.rows[i];
      row.insert(row.end(), nulls.begin(), nulls.end());
      rows.push_back(std::move(row));
      sources.push_back(work.source_rows[i]);
      continue;
    }
    for (auto r : it->second) {
      auto row = work.rows[i];
      row.insert(row.end(), rt.rows[r].begin(), rt.rows[r].end());
      rows.push_back(std::move(row));
      sources.push_back(work.source_rows[i]);
    }
  }
  for (const auto& f : rt.fields) {
    std::string name = step.right_alias + "." + f.name;
    for (const auto& c : work.columns) {
      if (c.name == name) throw Error(ErrorCode::InvalidTransform, "alias '" + step.right_alias + "' joined twice", locus);
    }
    work.columns.push_back({std::move(name), f.kind, false});
  }
  work.rows = std::move(rows);
  work.source_rows = std::move(sources);
}

void orderby(Work& work, const EntityTable& primary, const Orderby& step, const std::string& locus) {
  const auto col = work.column(step.field, locus);
  std::vector<std::size_t> order(work.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Key> pks;
  if (work.row_level) {
    pks.reserve(work.rows.size());
    for (auto s : work.source_rows) pks.push_back(source_key(primary, s));
  }
  const bool desc = step.direction == SortDirection::descending;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Cell& x = work.rows[a][col];
    const Cell& y = work.rows[b][col];
    if (is_null(x) != is_null(y)) return is_null(y);
    int c = compare_cells(x, y);
    if (c != 0) return desc ? c > 0 : c < 0;
    if (work.row_level) return compare_keys(pks[a], pks[b]) < 0;
    return false;
  });
  std::vector<std::vector<Cell>> rows;
  std::vector<std::size_t> sources;
  rows.reserve(order.size());
  for (auto i : order) {
    rows.push_back(std::move(work.rows[i]));
    if (work.row_level) sources.push_back(work.source_rows[i]);
  }
  work.rows = std::move(rows);
  work.source_rows = std::move(sources);
}

}  // namespace

ResultTable execute(const VizSpec& spec, const Package& package, const SelectionRegistry& registry) {
  if (spec.sources.empty()) throw Error(ErrorCode::MalformedDocument, "spec has no source", "/source");
  const auto& primary = package.entity(spec.primary_entity());
  for (const auto& s : spec.sources) package.entity(s.entity);

  Work work;
  for (const auto& f : primary.fields) work.columns.push_back({f.name, f.kind, true});
  work.rows = primary.rows;
  work.source_rows.resize(primary.row_count());
  std::iota(work.source_rows.begin(), work.source_rows.end(), 0);

  for (const auto& step : detail::plan_transforms(spec.transforms)) {
    const std::string locus = "/transformation/" + std::to_string(step.first);
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, SelectionFilter>) {
            if (!work.row_level) {
              throw Error(ErrorCode::InvalidTransform, "named filters apply to row-level tables only", locus);
            }
            const RowMask mask = named_filter_mask(package, registry, t, primary.name);
            std::vector<bool> keep(work.rows.size());
            for (std::size_t r = 0; r < work.rows.size(); ++r) keep[r] = mask[work.source_rows[r]];
            work.keep(keep);
          } else if constexpr (std::is_same_v<T, PredicateFilter>) {
            const auto col = work.column(t.predicate.field, locus);
            const auto kind = work.columns[col].kind;
            if (t.predicate.op == Predicate::Op::range && kind != FieldKind::quantitative) {
              throw Error(ErrorCode::KindMismatch, "range needs a quantitative field", locus);
            }
            if (t.predicate.op == Predicate::Op::in && !is_categorical(kind)) {
              throw Error(ErrorCode::KindMismatch, "'in' needs a nominal or ordinal field", locus);
            }
            std::vector<bool> keep(work.rows.size());
            for (std::size_t r = 0; r < work.rows.size(); ++r) keep[r] = predicate_admits(t.predicate, work.rows[r][col]);
            work.keep(keep);
          } else if constexpr (std::is_same_v<T, detail::GroupAggregate>) {
            if (t.keys.empty()) throw Error(ErrorCode::EmptyGroupby, "groupby needs at least one field", locus);
            aggregate(work, t.keys, t.rollups, locus);
          } else if constexpr (std::is_same_v<T, detail::WholeAggregate>) {
            aggregate(work, {}, t.rollups, locus);
          } else if constexpr (std::is_same_v<T, detail::GroupDistinct>) {
            if (t.keys.empty()) throw Error(ErrorCode::EmptyGroupby, "groupby needs at least one field", locus);
            distinct(work, t.keys, locus);
          } else if constexpr (std::is_same_v<T, detail::PartitionedCdf>) {
            cdf(work, primary, t, locus);
          } else if constexpr (std::is_same_v<T, Join>) {
            join(work, spec, package, t, locus);
          } else {
            orderby(work, primary, t, locus);
          }
        },
        step.body);
  }

  ResultTable out;
  out.columns = std::move(work.columns);
  out.rows = std::move(work.rows);
  if (work.row_level) {
    std::vector<Key> prov;
    prov.reserve(work.source_rows.size());
    for (auto s : work.source_rows) prov.push_back(source_key(primary, s));
    out.provenance = std::move(prov);
  }
  return out;
}

}  // namespace vizlink
