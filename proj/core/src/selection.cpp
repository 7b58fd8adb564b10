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

#include "vizlink/selection.hpp"

#include <algorithm>
#include <unordered_set>

#include "vizlink/error.hpp"

namespace vizlink {

using nlohmann::json;

bool Interval::admits(const Cell& cell) const noexcept {
  if (unbounded()) return true;
  const auto* d = std::get_if<double>(&cell);
  if (!d) return false;
  return (!min || *d >= *min) && (!max || *d <= *max);
}

void canonicalize(Selection& selection) {
  std::sort(selection.points.begin(), selection.points.end(),
            [](const Key& a, const Key& b) { return compare_keys(a, b) < 0; });
  selection.points.erase(std::unique(selection.points.begin(), selection.points.end(),
                                     [](const Key& a, const Key& b) { return compare_keys(a, b) == 0; }),
                         selection.points.end());
}

RowMask selection_mask(const Selection& selection, const EntityTable& table) {
  const auto cols = table.columns_of(selection.fields);
  RowMask mask(table.row_count(), false);
  if (selection.kind == SelectionKind::interval) {
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      bool ok = true;
      for (std::size_t f = 0; f < cols.size() && ok; ++f) ok = selection.intervals[f].admits(table.rows[r][cols[f]]);
      mask[r] = ok;
    }
    return mask;
  }
  std::unordered_set<Key, KeyHash> admitted(selection.points.begin(), selection.points.end());
  for (std::size_t r = 0; r < table.row_count(); ++r) mask[r] = admitted.contains(table.key_of(r, cols));
  return mask;
}

Payload payload_of(const Selection& selection) {
  if (selection.kind == SelectionKind::point) return selection.points;
  std::map<std::string, Interval> out;
  for (std::size_t i = 0; i < selection.fields.size(); ++i) out[selection.fields[i]] = selection.intervals[i];
  return out;
}

void apply_payload(Selection& selection, const Payload& payload) {
  if (const auto* ranges = std::get_if<std::map<std::string, Interval>>(&payload)) {
    if (selection.kind != SelectionKind::interval) {
      throw Error(ErrorCode::KindMismatch, "point selections take a 'values' payload", selection.name);
    }
    std::vector<Interval> intervals;
    for (const auto& field : selection.fields) {
      auto it = ranges->find(field);
      if (it == ranges->end()) throw Error(ErrorCode::UnknownField, "payload lacks field '" + field + "'", selection.name);
      intervals.push_back(it->second);
    }
    if (ranges->size() != selection.fields.size()) {
      throw Error(ErrorCode::UnknownField, "payload names fields outside the selection", selection.name);
    }
    selection.intervals = std::move(intervals);
    return;
  }
  if (selection.kind != SelectionKind::point) {
    throw Error(ErrorCode::KindMismatch, "interval selections take an 'intervals' payload", selection.name);
  }
  const auto& points = std::get<std::vector<Key>>(payload);
  for (const auto& p : points) {
    if (p.size() != selection.fields.size()) {
      throw Error(ErrorCode::MalformedDocument, "point tuple arity differs from the selection's fields", selection.name);
    }
  }
  selection.points = points;
  canonicalize(selection);
}

json to_json(const Payload& payload) {
  if (const auto* ranges = std::get_if<std::map<std::string, Interval>>(&payload)) {
    json intervals = json::object();
    for (const auto& [field, iv] : *ranges) {
      intervals[field] = json::array({iv.min ? json(*iv.min) : json(nullptr), iv.max ? json(*iv.max) : json(nullptr)});
    }
    return json{{"intervals", std::move(intervals)}};
  }
  json values = json::array();
  for (const auto& tuple : std::get<std::vector<Key>>(payload)) {
    json t = json::array();
    for (const auto& c : tuple) t.push_back(cell_to_json(c));
    values.push_back(std::move(t));
  }
  return json{{"values", std::move(values)}};
}

Payload payload_from_json(const json& doc) {
  if (!doc.is_object() || doc.size() != 1) {
    throw Error(ErrorCode::MalformedDocument, "payload must hold exactly one of 'intervals' or 'values'");
  }
  if (doc.contains("intervals")) {
    if (!doc["intervals"].is_object()) throw Error(ErrorCode::MalformedDocument, "'intervals' must be an object");
    std::map<std::string, Interval> out;
    for (const auto& [field, pair] : doc["intervals"].items()) {
      if (!pair.is_array() || pair.size() != 2) {
        throw Error(ErrorCode::MalformedDocument, "interval must be [min, max]", field);
      }
      Interval iv;
      for (int k = 0; k < 2; ++k) {
        if (pair[k].is_null()) continue;
        if (!pair[k].is_number()) throw Error(ErrorCode::MalformedDocument, "interval bounds must be numbers", field);
        (k == 0 ? iv.min : iv.max) = pair[k].get<double>();
      }
      out[field] = iv;
    }
    return out;
  }
  if (!doc.contains("values") || !doc["values"].is_array()) {
    throw Error(ErrorCode::MalformedDocument, "payload must hold 'intervals' or 'values'");
  }
  std::vector<Key> points;
  for (const auto& tuple : doc["values"]) {
    Key key;
    if (tuple.is_array()) {
      for (const auto& v : tuple) key.push_back(cell_from_json(v));
    } else {
      key.push_back(cell_from_json(tuple));
    }
    points.push_back(std::move(key));
  }
  return points;
}

json payload_to_json(const Selection& selection) { return to_json(payload_of(selection)); }

void apply_payload_json(Selection& selection, const json& payload) { apply_payload(selection, payload_from_json(payload)); }

json to_json(const Selection& selection) {
  json doc{{"name", selection.name},
           {"kind", std::string(to_string(selection.kind))},
           {"entity", selection.entity},
           {"fields", selection.fields}};
  doc["payload"] = payload_to_json(selection);
  return doc;
}

Selection selection_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "selection must be an object");
  Selection s;
  try {
    s.name = doc.at("name").get<std::string>();
    auto kind = doc.at("kind").get<std::string>();
    if (kind == "point") s.kind = SelectionKind::point;
    else if (kind == "interval") s.kind = SelectionKind::interval;
    else throw Error(ErrorCode::MalformedDocument, "unknown selection kind '" + kind + "'");
    s.entity = doc.at("entity").get<std::string>();
    s.fields = doc.at("fields").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("bad selection: ") + e.what());
  }
  if (s.fields.empty()) throw Error(ErrorCode::MalformedDocument, "selection needs at least one field");
  if (doc.contains("payload")) apply_payload_json(s, doc["payload"]);
  else if (s.kind == SelectionKind::interval) s.intervals.assign(s.fields.size(), Interval{});
  return s;
}

}  // namespace vizlink
