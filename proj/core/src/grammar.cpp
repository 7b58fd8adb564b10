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

#include "vizlink/grammar.hpp"

#include <algorithm>
#include <initializer_list>
#include <set>

#include "plan.hpp"
#include "vizlink/assets.hpp"

namespace vizlink {

using nlohmann::json;

std::string_view to_string(LinkMode mode) noexcept { return mode == LinkMode::all ? "all" : "any"; }

std::string_view to_string(AggregateOp op) noexcept {
  switch (op) {
    case AggregateOp::count: return "count";
    case AggregateOp::mean: return "mean";
    case AggregateOp::sum: return "sum";
    case AggregateOp::min: return "min";
    case AggregateOp::max: return "max";
  }
  return "count";
}

std::string_view to_string(Mark mark) noexcept {
  switch (mark) {
    case Mark::bar: return "bar";
    case Mark::point: return "point";
    case Mark::line: return "line";
    case Mark::row: return "row";
  }
  return "row";
}

std::string_view to_string(Channel channel) noexcept {
  switch (channel) {
    case Channel::x: return "x";
    case Channel::y: return "y";
    case Channel::color: return "color";
  }
  return "x";
}

std::string_view to_string(SelectionKind kind) noexcept { return kind == SelectionKind::point ? "point" : "interval"; }

std::string_view to_string(BrushGeometry geometry) noexcept {
  switch (geometry) {
    case BrushGeometry::x_interval: return "x";
    case BrushGeometry::y_interval: return "y";
    case BrushGeometry::xy_interval: return "xy";
    case BrushGeometry::point: return "point";
  }
  return "x";
}

const Encoding* Representation::find(Channel channel) const noexcept {
  for (const auto& e : mapping) {
    if (e.channel == channel) return &e;
  }
  return nullptr;
}

const SourceRef* VizSpec::find_source(std::string_view alias) const noexcept {
  for (const auto& s : sources) {
    if (s.alias == alias) return &s;
  }
  return nullptr;
}

const SelectionDecl* VizSpec::brush_selection() const noexcept {
  for (const auto& s : selections) {
    if (s.brush) return &s;
  }
  return nullptr;
}

namespace {

[[noreturn]] void malformed(const std::string& reason, const std::string& locus) {
  throw Error(ErrorCode::MalformedDocument, reason, locus);
}

void require_object(const json& doc, const std::string& locus) {
  if (!doc.is_object()) malformed("expected an object", locus);
}

void only_keys(const json& doc, std::initializer_list<std::string_view> allowed, const std::string& locus) {
  for (const auto& [key, _] : doc.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      malformed("unknown key '" + key + "'", locus);
    }
  }
}

std::string get_string(const json& doc, const char* key, const std::string& locus) {
  if (!doc.contains(key)) malformed(std::string("missing '") + key + "'", locus);
  const auto& v = doc[key];
  if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
    malformed(std::string("'") + key + "' must be a non-empty string", locus + "/" + key);
  }
  return v.get<std::string>();
}

std::vector<std::string> get_string_list(const json& doc, const char* key, const std::string& locus) {
  if (!doc.contains(key) || !doc[key].is_array() || doc[key].empty()) {
    malformed(std::string("'") + key + "' must be a non-empty list", locus);
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < doc[key].size(); ++i) {
    const auto& v = doc[key][i];
    if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
      malformed("expected a field name", locus + "/" + key + "/" + std::to_string(i));
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::optional<double> get_bound(const json& doc, const char* key, const std::string& locus) {
  if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
  if (!doc[key].is_number()) malformed(std::string("'") + key + "' must be a number", locus + "/" + key);
  return doc[key].get<double>();
}

FieldKind parse_encoding_kind(const json& doc, const std::string& locus) {
  auto text = get_string(doc, "type", locus);
  auto kind = field_kind_from_string(text);
  if (!kind || *kind == FieldKind::identifier) malformed("unknown encoding type '" + text + "'", locus + "/type");
  return *kind;
}

Predicate parse_predicate(const json& doc, const std::string& locus) {
  require_object(doc, locus);
  only_keys(doc, {"field", "op", "values", "min", "max"}, locus);
  Predicate p;
  p.field = get_string(doc, "field", locus);
  auto op = get_string(doc, "op", locus);
  if (op == "in") {
    p.op = Predicate::Op::in;
    if (!doc.contains("values") || !doc["values"].is_array()) malformed("'in' needs a values list", locus);
    for (const auto& v : doc["values"]) {
      if (!(v.is_null() || v.is_string())) malformed("'in' values must be strings or null", locus + "/values");
      p.values.push_back(cell_from_json(v));
    }
    if (doc.contains("min") || doc.contains("max")) malformed("'in' takes no bounds", locus);
  } else if (op == "range") {
    p.op = Predicate::Op::range;
    p.min = get_bound(doc, "min", locus);
    p.max = get_bound(doc, "max", locus);
    if (!p.min && !p.max) malformed("'range' needs min or max", locus);
    if (p.min && p.max && *p.min > *p.max) malformed("range min exceeds max", locus);
    if (doc.contains("values")) malformed("'range' takes no values", locus);
  } else if (op == "notnull" || op == "isnull") {
    p.op = op == "notnull" ? Predicate::Op::notnull : Predicate::Op::isnull;
    if (doc.contains("values") || doc.contains("min") || doc.contains("max")) malformed("'" + op + "' takes no operands", locus);
  } else {
    malformed("unknown predicate op '" + op + "'", locus + "/op");
  }
  return p;
}

Relationship parse_relationship(const json& doc, const std::string& locus) {
  try {
    return relationship_from_json(doc);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedDocument, e.message(), locus);
  }
}

Transform parse_transform(const json& doc, const std::string& locus) {
  require_object(doc, locus);
  if (doc.size() != 1) malformed("a transform is an object with exactly one key", locus);
  const auto& [kind, body] = *doc.items().begin();
  const std::string blocus = locus + "/" + kind;
  if (kind == "filter") {
    require_object(body, blocus);
    if (body.contains("selection")) {
      only_keys(body, {"selection", "via", "mode", "injected"}, blocus);
      SelectionFilter f;
      f.selection = get_string(body, "selection", blocus);
      if (body.contains("via")) f.via = parse_relationship(body["via"], blocus + "/via");
      if (body.contains("mode")) {
        auto mode = get_string(body, "mode", blocus);
        if (mode == "any") f.mode = LinkMode::any;
        else if (mode == "all") f.mode = LinkMode::all;
        else malformed("mode must be 'any' or 'all'", blocus + "/mode");
      }
      if (body.contains("injected")) {
        if (!body["injected"].is_boolean()) malformed("'injected' must be boolean", blocus + "/injected");
        f.injected = body["injected"].get<bool>();
      }
      return f;
    }
    only_keys(body, {"predicate"}, blocus);
    if (!body.contains("predicate")) malformed("filter needs 'selection' or 'predicate'", blocus);
    return PredicateFilter{parse_predicate(body["predicate"], blocus + "/predicate")};
  }
  if (kind == "groupby") {
    require_object(body, blocus);
    only_keys(body, {"fields"}, blocus);
    if (body.contains("fields") && body["fields"].is_array() && body["fields"].empty()) {
      throw Error(ErrorCode::EmptyGroupby, "groupby needs at least one field", blocus);
    }
    return Groupby{get_string_list(body, "fields", blocus)};
  }
  if (kind == "rollup") {
    require_object(body, blocus);
    only_keys(body, {"out", "op", "field"}, blocus);
    Rollup r;
    r.out_field = get_string(body, "out", blocus);
    auto op = get_string(body, "op", blocus);
    if (op == "count") r.op = AggregateOp::count;
    else if (op == "mean") r.op = AggregateOp::mean;
    else if (op == "sum") r.op = AggregateOp::sum;
    else if (op == "min") r.op = AggregateOp::min;
    else if (op == "max") r.op = AggregateOp::max;
    else malformed("unknown rollup op '" + op + "'", blocus + "/op");
    if (r.op == AggregateOp::count) {
      if (body.contains("field")) malformed("count takes no field", blocus);
    } else {
      r.in_field = get_string(body, "field", blocus);
    }
    return r;
  }
  if (kind == "cdf") {
    require_object(body, blocus);
    only_keys(body, {"field", "out"}, blocus);
    return Cdf{get_string(body, "field", blocus), get_string(body, "out", blocus)};
  }
  if (kind == "join") {
    require_object(body, blocus);
    only_keys(body, {"left", "right", "via"}, blocus);
    Join j;
    j.left_alias = get_string(body, "left", blocus);
    j.right_alias = get_string(body, "right", blocus);
    if (!body.contains("via")) malformed("join needs 'via'", blocus);
    j.via = parse_relationship(body["via"], blocus + "/via");
    return j;
  }
  if (kind == "orderby") {
    require_object(body, blocus);
    only_keys(body, {"field", "direction"}, blocus);
    Orderby o;
    o.field = get_string(body, "field", blocus);
    if (body.contains("direction")) {
      auto dir = get_string(body, "direction", blocus);
      if (dir == "asc") o.direction = SortDirection::ascending;
      else if (dir == "desc") o.direction = SortDirection::descending;
      else malformed("direction must be 'asc' or 'desc'", blocus + "/direction");
    }
    return o;
  }
  throw Error(ErrorCode::UnknownTransformKind, "unknown transform '" + kind + "'", locus);
}

Representation parse_representation(const json& doc, const std::string& locus) {
  require_object(doc, locus);
  only_keys(doc, {"mark", "mapping"}, locus);
  Representation rep;
  if (!doc.contains("mark") || !doc["mark"].is_string()) malformed("representation needs a mark", locus);
  auto mark = doc["mark"].get<std::string>();
  if (mark == "bar") rep.mark = Mark::bar;
  else if (mark == "point") rep.mark = Mark::point;
  else if (mark == "line") rep.mark = Mark::line;
  else if (mark == "row") rep.mark = Mark::row;
  else throw Error(ErrorCode::UnknownMark, "unknown mark '" + mark + "'", locus + "/mark");

  if (doc.contains("mapping")) {
    if (!doc["mapping"].is_array()) malformed("mapping must be a list", locus + "/mapping");
    std::set<Channel> seen;
    for (std::size_t i = 0; i < doc["mapping"].size(); ++i) {
      const auto& e = doc["mapping"][i];
      const std::string elocus = locus + "/mapping/" + std::to_string(i);
      require_object(e, elocus);
      only_keys(e, {"channel", "field", "type", "stack"}, elocus);
      Encoding enc;
      auto channel = get_string(e, "channel", elocus);
      if (channel == "x") enc.channel = Channel::x;
      else if (channel == "y") enc.channel = Channel::y;
      else if (channel == "color") enc.channel = Channel::color;
      else throw Error(ErrorCode::UnknownChannel, "unknown channel '" + channel + "'", elocus + "/channel");
      if (!seen.insert(enc.channel).second) {
        throw Error(ErrorCode::DuplicateChannel, "channel '" + channel + "' used twice", elocus);
      }
      enc.field = get_string(e, "field", elocus);
      enc.field_kind = parse_encoding_kind(e, elocus);
      if (e.contains("stack")) {
        auto stack = get_string(e, "stack", elocus);
        if (stack == "none") enc.stack = Stack::none;
        else if (stack == "stacked") enc.stack = Stack::stacked;
        else if (stack == "normalized") enc.stack = Stack::normalized;
        else malformed("unknown stack option '" + stack + "'", elocus + "/stack");
        if (rep.mark != Mark::bar) malformed("stack applies only to bar marks", elocus + "/stack");
      }
      rep.mapping.push_back(std::move(enc));
    }
  }
  if (rep.mark == Mark::row && !rep.mapping.empty()) malformed("row mark takes no encodings", locus);
  if (rep.mark != Mark::row && !rep.find(Channel::x) && !rep.find(Channel::y)) {
    malformed("mark '" + mark + "' needs an x or y encoding", locus);
  }
  return rep;
}

SelectionDecl parse_selection_decl(const json& doc, const std::string& locus) {
  require_object(doc, locus);
  only_keys(doc, {"name", "kind", "entity", "fields", "brush", "mapping"}, locus);
  SelectionDecl d;
  d.name = get_string(doc, "name", locus);
  auto kind = get_string(doc, "kind", locus);
  if (kind == "point") d.kind = SelectionKind::point;
  else if (kind == "interval") d.kind = SelectionKind::interval;
  else malformed("selection kind must be 'point' or 'interval'", locus + "/kind");
  d.entity = get_string(doc, "entity", locus);
  d.fields = get_string_list(doc, "fields", locus);
  if (doc.contains("brush")) {
    auto g = get_string(doc, "brush", locus);
    if (g == "x") d.brush = BrushGeometry::x_interval;
    else if (g == "y") d.brush = BrushGeometry::y_interval;
    else if (g == "xy") d.brush = BrushGeometry::xy_interval;
    else if (g == "point") d.brush = BrushGeometry::point;
    else malformed("unknown brush geometry '" + g + "'", locus + "/brush");
    if ((*d.brush == BrushGeometry::point) != (d.kind == SelectionKind::point)) {
      malformed("brush geometry does not match selection kind", locus);
    }
  }
  if (doc.contains("mapping")) d.mapping = parse_relationship(doc["mapping"], locus + "/mapping");
  return d;
}

json relationship_json(const Relationship& rel) { return to_json(rel); }

}  // namespace

VizSpec parse_spec(const json& document) {
  require_object(document, "");
  only_keys(document, {"source", "transformation", "representation", "selections"}, "");
  VizSpec spec;
  if (!document.contains("source") || !document["source"].is_array() || document["source"].empty()) {
    malformed("'source' must list at least one table", "/source");
  }
  std::set<std::string> aliases;
  for (std::size_t i = 0; i < document["source"].size(); ++i) {
    const auto& s = document["source"][i];
    const std::string locus = "/source/" + std::to_string(i);
    require_object(s, locus);
    only_keys(s, {"alias", "entity"}, locus);
    SourceRef ref{get_string(s, "alias", locus), get_string(s, "entity", locus)};
    if (!aliases.insert(ref.alias).second) throw Error(ErrorCode::DuplicateAlias, "alias '" + ref.alias + "' repeats", locus);
    spec.sources.push_back(std::move(ref));
  }
  if (document.contains("transformation")) {
    const auto& list = document["transformation"];
    if (!list.is_array()) malformed("'transformation' must be a list", "/transformation");
    for (std::size_t i = 0; i < list.size(); ++i) {
      spec.transforms.push_back(parse_transform(list[i], "/transformation/" + std::to_string(i)));
    }
  }
  if (document.contains("representation") && !document["representation"].is_null()) {
    spec.representation = parse_representation(document["representation"], "/representation");
  }
  if (document.contains("selections")) {
    const auto& list = document["selections"];
    if (!list.is_array()) malformed("'selections' must be a list", "/selections");
    std::set<std::string> names;
    int brushes = 0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      auto decl = parse_selection_decl(list[i], "/selections/" + std::to_string(i));
      if (!names.insert(decl.name).second) malformed("selection '" + decl.name + "' declared twice", "/selections");
      if (decl.brush && ++brushes > 1) malformed("at most one brush selection per spec", "/selections");
      spec.selections.push_back(std::move(decl));
    }
  }
  return spec;
}

VizSpec parse_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("not valid JSON: ") + e.what());
  }
  return parse_spec(doc);
}

json to_json(const Transform& transform) {
  return std::visit(
      [](const auto& t) -> json {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SelectionFilter>) {
          json body{{"selection", t.selection}};
          if (t.via) {
            body["via"] = relationship_json(*t.via);
            body["mode"] = std::string(to_string(t.mode));
          } else if (t.mode == LinkMode::all) {
            body["mode"] = "all";
          }
          if (t.injected) body["injected"] = true;
          return json{{"filter", body}};
        } else if constexpr (std::is_same_v<T, PredicateFilter>) {
          const auto& p = t.predicate;
          json pred{{"field", p.field}};
          switch (p.op) {
            case Predicate::Op::in: {
              pred["op"] = "in";
              json values = json::array();
              for (const auto& v : p.values) values.push_back(cell_to_json(v));
              pred["values"] = std::move(values);
              break;
            }
            case Predicate::Op::range:
              pred["op"] = "range";
              if (p.min) pred["min"] = *p.min;
              if (p.max) pred["max"] = *p.max;
              break;
            case Predicate::Op::notnull: pred["op"] = "notnull"; break;
            case Predicate::Op::isnull: pred["op"] = "isnull"; break;
          }
          return json{{"filter", {{"predicate", pred}}}};
        } else if constexpr (std::is_same_v<T, Groupby>) {
          return json{{"groupby", {{"fields", t.fields}}}};
        } else if constexpr (std::is_same_v<T, Rollup>) {
          json body{{"out", t.out_field}, {"op", std::string(to_string(t.op))}};
          if (t.in_field) body["field"] = *t.in_field;
          return json{{"rollup", body}};
        } else if constexpr (std::is_same_v<T, Cdf>) {
          return json{{"cdf", {{"field", t.field}, {"out", t.out_fraction}}}};
        } else if constexpr (std::is_same_v<T, Join>) {
          return json{{"join", {{"left", t.left_alias}, {"right", t.right_alias}, {"via", relationship_json(t.via)}}}};
        } else {
          return json{{"orderby",
                       {{"field", t.field}, {"direction", t.direction == SortDirection::descending ? "desc" : "asc"}}}};
        }
      },
      transform);
}

json to_json(const VizSpec& spec) {
  json doc;
  json sources = json::array();
  for (const auto& s : spec.sources) sources.push_back({{"alias", s.alias}, {"entity", s.entity}});
  doc["source"] = std::move(sources);
  if (!spec.transforms.empty()) {
    json list = json::array();
    for (const auto& t : spec.transforms) list.push_back(to_json(t));
    doc["transformation"] = std::move(list);
  }
  if (spec.representation) {
    json mapping = json::array();
    for (const auto& e : spec.representation->mapping) {
      json enc{{"channel", std::string(to_string(e.channel))},
               {"field", e.field},
               {"type", std::string(to_string(e.field_kind))}};
      if (e.stack) {
        enc["stack"] = *e.stack == Stack::none ? "none" : (*e.stack == Stack::stacked ? "stacked" : "normalized");
      }
      mapping.push_back(std::move(enc));
    }
    json rep{{"mark", std::string(to_string(spec.representation->mark))}};
    if (!mapping.empty()) rep["mapping"] = std::move(mapping);
    doc["representation"] = std::move(rep);
  }
  if (!spec.selections.empty()) {
    json list = json::array();
    for (const auto& s : spec.selections) {
      json d{{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"entity", s.entity}, {"fields", s.fields}};
      if (s.brush) d["brush"] = std::string(to_string(*s.brush));
      if (s.mapping) d["mapping"] = relationship_json(*s.mapping);
      list.push_back(std::move(d));
    }
    doc["selections"] = std::move(list);
  }
  return doc;
}

const json& grammar_schema() {
  static const json schema = json::parse(asset("schemas/grammar.schema.json"));
  return schema;
}

namespace {

struct Walk {
  std::vector<ColumnInfo> columns;
  bool row_level = true;
  std::vector<Violation> violations;

  const ColumnInfo* find(std::string_view name) const {
    for (const auto& c : columns) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
  void add(ErrorCode code, std::string locus, std::string reason) {
    violations.push_back({code, std::move(locus), std::move(reason)});
  }
  const ColumnInfo* require(std::string_view name, const std::string& locus) {
    const auto* c = find(name);
    if (!c) add(ErrorCode::UnresolvedField, locus, "no column '" + std::string(name) + "' at this point");
    return c;
  }
  bool require_all(const std::vector<std::string>& names, const std::string& locus) {
    bool ok = true;
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (!require(names[k], locus + "/" + std::to_string(k))) ok = false;
    }
    return ok;
  }
  std::vector<ColumnInfo> pick(const std::vector<std::string>& names) const {
    std::vector<ColumnInfo> out;
    for (const auto& n : names) out.push_back(*find(n));
    return out;
  }
  void rollups(const std::vector<Rollup>& list, std::size_t first, std::vector<ColumnInfo> base) {
    std::vector<ColumnInfo> before = columns;
    for (std::size_t r = 0; r < list.size(); ++r) {
      const std::string locus = "/transformation/" + std::to_string(first + r) + "/rollup";
      const auto& rollup = list[r];
      if (rollup.in_field) {
        const ColumnInfo* col = nullptr;
        for (const auto& c : before) {
          if (c.name == *rollup.in_field) col = &c;
        }
        if (!col) {
          add(ErrorCode::UnresolvedField, locus + "/field", "no column '" + *rollup.in_field + "' at this point");
        } else if (col->kind != FieldKind::quantitative) {
          add(ErrorCode::KindMismatch, locus + "/field", "aggregate needs a quantitative field");
        }
      }
      bool clash = false;
      for (const auto& c : base) clash = clash || c.name == rollup.out_field;
      if (clash) {
        add(ErrorCode::InvalidTransform, locus + "/out", "output column '" + rollup.out_field + "' already exists");
      } else {
        base.push_back({rollup.out_field, FieldKind::quantitative, false});
      }
    }
    columns = std::move(base);
    row_level = false;
  }
};

bool relation_declared(const Package& package, const Relationship& rel) {
  return std::find(package.relations.begin(), package.relations.end(), rel) != package.relations.end();
}

Walk walk_spec(const VizSpec& spec, const Package& package) {
  Walk w;
  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    if (!package.find_entity(spec.sources[i].entity)) {
      w.add(ErrorCode::UnknownEntity, "/source/" + std::to_string(i) + "/entity",
            "no entity '" + spec.sources[i].entity + "'");
    }
  }
  if (!w.violations.empty()) return w;

  const auto& primary = package.entity(spec.primary_entity());
  for (const auto& f : primary.fields) w.columns.push_back({f.name, f.kind, true});

  for (const auto& step : detail::plan_transforms(spec.transforms)) {
    const std::string locus = "/transformation/" + std::to_string(step.first);
    std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, SelectionFilter>) {
            if (!w.row_level) {
              w.add(ErrorCode::InvalidTransform, locus, "named filters apply to row-level tables only");
            }
            if (t.via) {
              if (!relation_declared(package, *t.via) || !t.via->touches(spec.primary_entity()) ||
                  t.via->from_entity == t.via->to_entity) {
                w.add(ErrorCode::JoinKeyMismatch, locus + "/filter/via",
                      "relationship is not a declared foreign key of '" + spec.primary_entity() + "'");
              }
            }
          } else if constexpr (std::is_same_v<T, PredicateFilter>) {
            const auto& p = t.predicate;
            const auto* col = w.require(p.field, locus + "/filter/predicate/field");
            if (col) {
              if (p.op == Predicate::Op::range && col->kind != FieldKind::quantitative) {
                w.add(ErrorCode::KindMismatch, locus + "/filter/predicate", "range needs a quantitative field");
              }
              if (p.op == Predicate::Op::in && !is_categorical(col->kind)) {
                w.add(ErrorCode::KindMismatch, locus + "/filter/predicate", "'in' needs a nominal or ordinal field");
              }
            }
          } else if constexpr (std::is_same_v<T, detail::GroupAggregate>) {
            if (t.keys.empty()) {
              w.add(ErrorCode::EmptyGroupby, locus, "groupby needs at least one field");
              return;
            }
            if (!w.require_all(t.keys, locus + "/groupby/fields")) return;
            w.rollups(t.rollups, step.first + 1, w.pick(t.keys));
          } else if constexpr (std::is_same_v<T, detail::WholeAggregate>) {
            w.rollups(t.rollups, step.first, {});
          } else if constexpr (std::is_same_v<T, detail::GroupDistinct>) {
            if (t.keys.empty()) {
              w.add(ErrorCode::EmptyGroupby, locus, "groupby needs at least one field");
              return;
            }
            if (!w.require_all(t.keys, locus + "/groupby/fields")) return;
            w.columns = w.pick(t.keys);
            w.row_level = false;
          } else if constexpr (std::is_same_v<T, detail::PartitionedCdf>) {
            const std::string clocus = "/transformation/" + std::to_string(step.first + step.count - 1) + "/cdf";
            if (!t.keys.empty() && !w.require_all(t.keys, locus + "/groupby/fields")) return;
            const auto* col = w.require(t.cdf.field, clocus + "/field");
            if (col && col->kind != FieldKind::quantitative) {
              w.add(ErrorCode::KindMismatch, clocus + "/field", "cdf needs a quantitative field");
            }
            if (!w.row_level) w.add(ErrorCode::InvalidTransform, clocus, "cdf applies to row-level tables only");
            if (w.find(t.cdf.out_fraction)) {
              w.add(ErrorCode::InvalidTransform, clocus + "/out",
                    "output column '" + t.cdf.out_fraction + "' already exists");
            } else {
              w.columns.push_back({t.cdf.out_fraction, FieldKind::quantitative, false});
            }
          } else if constexpr (std::is_same_v<T, Join>) {
            const auto* left = spec.find_source(t.left_alias);
            const auto* right = spec.find_source(t.right_alias);
            if (!left || !right) {
              w.add(ErrorCode::UnresolvedField, locus + "/join", "join names an undeclared alias");
              return;
            }
            if (left != &spec.sources.front() || right == left) {
              w.add(ErrorCode::InvalidTransform, locus + "/join", "join must run from the primary source to another source");
              return;
            }
            if (!w.row_level) w.add(ErrorCode::InvalidTransform, locus, "join applies to row-level tables only");
            const bool connects = (t.via.from_entity == left->entity && t.via.to_entity == right->entity) ||
                                  (t.via.from_entity == right->entity && t.via.to_entity == left->entity);
            if (!connects || !relation_declared(package, t.via) || left->entity == right->entity) {
              w.add(ErrorCode::JoinKeyMismatch, locus + "/join/via", "relationship does not link the joined aliases");
              return;
            }
            for (const auto& f : package.entity(right->entity).fields) {
              const std::string name = t.right_alias + "." + f.name;
              if (w.find(name)) {
                w.add(ErrorCode::InvalidTransform, locus + "/join", "alias '" + t.right_alias + "' joined twice");
                return;
              }
              w.columns.push_back({name, f.kind, false});
            }
          } else {
            w.require(t.field, locus + "/orderby/field");
          }
        },
        step.body);
  }

  if (spec.representation) {
    for (std::size_t i = 0; i < spec.representation->mapping.size(); ++i) {
      const auto& e = spec.representation->mapping[i];
      const std::string locus = "/representation/mapping/" + std::to_string(i);
      const auto* col = w.require(e.field, locus + "/field");
      if (!col) continue;
      const bool quant_col = col->kind == FieldKind::quantitative;
      const bool quant_enc = e.field_kind == FieldKind::quantitative;
      if (quant_col != quant_enc) {
        w.add(ErrorCode::KindMismatch, locus + "/type",
              "field '" + e.field + "' is " + std::string(to_string(col->kind)) + ", encoded as " +
                  std::string(to_string(e.field_kind)));
      }
    }
  }

  for (std::size_t i = 0; i < spec.selections.size(); ++i) {
    const auto& d = spec.selections[i];
    const std::string locus = "/selections/" + std::to_string(i);
    const auto* entity = package.find_entity(d.entity);
    if (!entity) {
      w.add(ErrorCode::UnknownEntity, locus + "/entity", "no entity '" + d.entity + "'");
      continue;
    }
    for (const auto& f : d.fields) {
      const auto* field = entity->find_field(f);
      if (!field) {
        w.add(ErrorCode::UnresolvedField, locus + "/fields", "entity '" + d.entity + "' has no field '" + f + "'");
        continue;
      }
      if (d.kind == SelectionKind::interval && field->kind != FieldKind::quantitative) {
        w.add(ErrorCode::KindMismatch, locus + "/fields", "interval selections need quantitative fields");
      }
      if (d.kind == SelectionKind::point && !is_categorical(field->kind)) {
        w.add(ErrorCode::KindMismatch, locus + "/fields", "point selections need nominal or ordinal fields");
      }
    }
  }
  return w;
}

}  // namespace

std::vector<Violation> validate_spec(const VizSpec& spec, const Package& package) {
  if (spec.sources.empty()) return {{ErrorCode::MalformedDocument, "/source", "spec has no source"}};
  return walk_spec(spec, package).violations;
}

std::vector<ColumnInfo> output_columns(const VizSpec& spec, const Package& package) {
  auto w = walk_spec(spec, package);
  if (!w.violations.empty()) {
    const auto& v = w.violations.front();
    throw Error(v.code, v.reason, v.locus);
  }
  return w.columns;
}

VizSpec default_representation(VizSpec spec) {
  if (!spec.representation) spec.representation = Representation{Mark::row, {}};
  return spec;
}

}  // namespace vizlink
