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

#include "vizlink/session.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "vizlink/csv.hpp"
#include "vizlink/error.hpp"

namespace vizlink {

using nlohmann::json;

const VizEntry* SessionState::find_viz(std::string_view viz_id) const noexcept {
  for (const auto& v : dashboard) {
    if (v.viz_id == viz_id) return &v;
  }
  return nullptr;
}

SessionState new_session(std::string id, std::shared_ptr<const Package> package) {
  if (!package) throw Error(ErrorCode::InvalidAction, "session needs a package");
  SessionState s;
  s.id = std::move(id);
  s.package = std::move(package);
  return s;
}

namespace {

std::string_view origin_name(SelectionOrigin o) { return o == SelectionOrigin::brush ? "brush" : "agent"; }

SelectionOrigin origin_from(const std::string& text) {
  if (text == "brush") return SelectionOrigin::brush;
  if (text == "agent") return SelectionOrigin::agent;
  throw Error(ErrorCode::MalformedDocument, "unknown selection origin '" + text + "'");
}

std::string_view entry_kind_name(Entry::Kind k) {
  switch (k) {
    case Entry::Kind::user: return "user";
    case Entry::Kind::agent: return "agent";
    case Entry::Kind::viz_widget: return "viz_widget";
    case Entry::Kind::filter_widget: return "filter_widget";
  }
  return "user";
}

Entry::Kind entry_kind_from(const std::string& text) {
  if (text == "user") return Entry::Kind::user;
  if (text == "agent") return Entry::Kind::agent;
  if (text == "viz_widget") return Entry::Kind::viz_widget;
  if (text == "filter_widget") return Entry::Kind::filter_widget;
  throw Error(ErrorCode::MalformedDocument, "unknown entry kind '" + text + "'");
}

Channel channel_from(const std::string& text) {
  if (text == "x") return Channel::x;
  if (text == "y") return Channel::y;
  if (text == "color") return Channel::color;
  throw Error(ErrorCode::UnknownChannel, "unknown channel '" + text + "'");
}

BrushGeometry geometry_from(const std::string& text) {
  if (text == "x") return BrushGeometry::x_interval;
  if (text == "y") return BrushGeometry::y_interval;
  if (text == "xy") return BrushGeometry::xy_interval;
  if (text == "point") return BrushGeometry::point;
  throw Error(ErrorCode::MalformedDocument, "unknown brush geometry '" + text + "'");
}

[[noreturn]] void invalid(const std::string& reason, const std::string& locus = {}) {
  throw Error(ErrorCode::InvalidAction, reason, locus);
}

void reinject_all(SessionState& s) {
  for (auto& v : s.dashboard) v.spec = inject_filters(std::move(v.spec), s.registry, *s.package);
}

/// Identity payload: open ranges, or every observed category including null.
Payload full_domain(const Selection& selection, const Package& package) {
  if (selection.kind == SelectionKind::interval) {
    std::map<std::string, Interval> out;
    for (const auto& f : selection.fields) out[f] = Interval{};
    return out;
  }
  const auto& table = package.entity(selection.entity);
  const auto cols = table.columns_of(selection.fields);
  std::set<Key, decltype([](const Key& a, const Key& b) { return compare_keys(a, b) < 0; })> seen;
  for (std::size_t r = 0; r < table.row_count(); ++r) seen.insert(table.key_of(r, cols));
  return std::vector<Key>(seen.begin(), seen.end());
}

json brush_json(const BrushBinding& b) {
  return json{{"selection", b.selection},
              {"geometry", std::string(to_string(b.brush.geometry))},
              {"fields", b.brush.fields}};
}

BrushBinding brush_from_json(const std::string& viz_id, const json& doc) {
  BrushBinding b;
  b.viz_id = viz_id;
  b.selection = doc.at("selection").get<std::string>();
  b.brush.geometry = geometry_from(doc.at("geometry").get<std::string>());
  b.brush.fields = doc.at("fields").get<std::vector<std::string>>();
  return b;
}

/// Attaches (or drops) the chart's brush to match its current encodings.
void bind_brush(SessionState& s, VizEntry& viz) {
  auto derived = derive_brush(viz.spec);
  if (viz.brush && derived && viz.brush->brush == *derived) return;
  if (viz.brush) {
    s.registry.erase(viz.brush->selection);
    s.origins.erase(viz.brush->selection);
    viz.brush.reset();
  }
  if (!derived) {
    std::erase_if(viz.spec.selections, [](const SelectionDecl& d) { return d.brush.has_value(); });
    return;
  }
  std::string name = viz.viz_id + "-brush";
  if (s.registry.contains(name) || std::any_of(s.entries.begin(), s.entries.end(), [&](const Entry& e) {
        return e.kind == Entry::Kind::filter_widget && e.target == name;
      })) {
    // an earlier brush of this chart used the plain name; keep widget references unambiguous
    int n = 2;
    auto taken = [&](const std::string& candidate) {
      return s.registry.contains(candidate) || std::any_of(s.entries.begin(), s.entries.end(), [&](const Entry& e) {
               return e.kind == Entry::Kind::filter_widget && e.target == candidate;
             });
    };
    while (taken(name + "-" + std::to_string(n))) ++n;
    name += "-" + std::to_string(n);
  }
  viz.spec = attach_brush(std::move(viz.spec), name, *derived);
  viz.brush = BrushBinding{viz.viz_id, name, *derived};
}

VizEntry* find_viz_mut(SessionState& s, std::string_view viz_id) {
  for (auto& v : s.dashboard) {
    if (v.viz_id == viz_id) return &v;
  }
  return nullptr;
}

void do_create_viz(SessionState& s, const CreateViz& a, std::vector<Event>& events) {
  const auto& pkg = *s.package;
  VizSpec spec = a.spec;
  // linking owns named filters and brush declarations; callers' copies are discarded
  std::erase_if(spec.transforms, [](const Transform& t) {
    const auto* f = std::get_if<SelectionFilter>(&t);
    return f && f->injected;
  });
  std::erase_if(spec.selections, [](const SelectionDecl& d) { return d.brush.has_value(); });
  if (spec.sources.empty()) invalid("spec has no source", "/source");
  auto violations = validate_spec(spec, pkg);
  if (!violations.empty()) {
    throw Error(ErrorCode::InvalidAction,
                std::string(to_string(violations.front().code)) + ": " + violations.front().reason,
                violations.front().locus);
  }
  VizEntry viz;
  viz.viz_id = "viz-" + std::to_string(s.next_viz++);
  viz.spec = default_representation(std::move(spec));
  bind_brush(s, viz);
  viz.spec = inject_filters(std::move(viz.spec), s.registry, pkg);
  try {
    execute(viz.spec, pkg, s.registry);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidAction, std::string(to_string(e.code())) + ": " + e.message(), e.locus());
  }
  s.entries.push_back(Entry{Entry::Kind::viz_widget, {}, viz.viz_id, {}});
  events.push_back({"viz_created", viz.viz_id});
  events.push_back({"widget_created", viz.viz_id});
  s.dashboard.push_back(std::move(viz));
}

void do_create_filter(SessionState& s, const CreateFilter& a, std::vector<Event>& events) {
  Selection sel = a.selection;
  if (sel.name.empty()) {
    do {
      sel.name = "filter-" + std::to_string(s.next_filter++);
    } while (s.registry.contains(sel.name));
  } else if (s.registry.contains(sel.name)) {
    invalid("selection '" + sel.name + "' already exists", sel.name);
  }
  if (sel.kind == SelectionKind::interval && sel.intervals.empty()) sel.intervals.assign(sel.fields.size(), Interval{});
  s.registry = update_selection(std::move(s.registry), sel, *s.package);
  s.origins[sel.name] = SelectionOrigin::agent;
  reinject_all(s);
  s.entries.push_back(Entry{Entry::Kind::filter_widget, {}, sel.name, {}});
  events.push_back({"filter_created", sel.name});
  events.push_back({"widget_created", sel.name});
}

void do_adjust_filter(SessionState& s, const AdjustFilter& a, std::vector<Event>& events) {
  auto it = s.registry.find(a.name);
  if (it == s.registry.end()) invalid("no filter named '" + a.name + "'", a.name);
  Selection sel = it->second;
  const auto& pkg = *s.package;
  if (a.entity || a.fields) {
    if (s.origins[a.name] == SelectionOrigin::brush) {
      invalid("brush filters follow their chart's axes and cannot be retargeted", a.name);
    }
    sel.entity = a.entity.value_or(sel.entity);
    const auto& table = pkg.entity(sel.entity);
    if (a.fields) sel.fields = *a.fields;
    if (sel.fields.empty()) throw Error(ErrorCode::UnknownField, "filter needs at least one field", a.name);
    std::optional<bool> quantitative;
    for (const auto& f : sel.fields) {
      const auto* field = table.find_field(f);
      if (!field) throw Error(ErrorCode::UnknownField, "entity '" + sel.entity + "' has no field '" + f + "'", a.name);
      if (field->kind == FieldKind::identifier) {
        throw Error(ErrorCode::KindMismatch, "identifier fields cannot be filtered", a.name + "/" + f);
      }
      const bool q = field->kind == FieldKind::quantitative;
      if (quantitative && *quantitative != q) {
        throw Error(ErrorCode::KindMismatch, "filter fields must share one kind", a.name);
      }
      quantitative = q;
    }
    sel.kind = *quantitative ? SelectionKind::interval : SelectionKind::point;
    sel.intervals.clear();
    sel.points.clear();
    if (sel.kind == SelectionKind::interval) sel.intervals.assign(sel.fields.size(), Interval{});
    apply_payload(sel, full_domain(sel, pkg));
  }
  if (a.payload) apply_payload(sel, *a.payload);
  s.registry = update_selection(std::move(s.registry), std::move(sel), pkg);
  reinject_all(s);
  events.push_back({"filter_updated", a.name});
}

void do_brush(SessionState& s, const Brush& a, std::vector<Event>& events) {
  const auto* viz = s.find_viz(a.viz_id);
  if (!viz) invalid("no chart '" + a.viz_id + "'", a.viz_id);
  if (!viz->brush) invalid("chart '" + a.viz_id + "' has no brush", a.viz_id);
  const auto binding = *viz->brush;
  const auto& pkg = *s.package;
  auto it = s.registry.find(binding.selection);
  if (!a.payload) {
    if (it == s.registry.end()) {
      events.push_back({"brush_cleared", binding.selection});
      return;
    }
    Selection sel = it->second;
    apply_payload(sel, full_domain(sel, pkg));
    s.registry = update_selection(std::move(s.registry), std::move(sel), pkg);
    reinject_all(s);
    events.push_back({"filter_updated", binding.selection});
    return;
  }
  const bool created = it == s.registry.end();
  Selection sel;
  if (created) {
    sel.name = binding.selection;
    sel.kind = binding.brush.kind();
    sel.entity = viz->spec.primary_entity();
    sel.fields = binding.brush.fields;
  } else {
    sel = it->second;
  }
  apply_payload(sel, *a.payload);
  s.registry = update_selection(std::move(s.registry), std::move(sel), pkg);
  reinject_all(s);
  if (created) {
    s.origins[binding.selection] = SelectionOrigin::brush;
    s.entries.push_back(Entry{Entry::Kind::filter_widget, {}, binding.selection, {}});
    events.push_back({"filter_created", binding.selection});
    events.push_back({"widget_created", binding.selection});
  } else {
    events.push_back({"filter_updated", binding.selection});
  }
}

void do_adjust_viz_field(SessionState& s, const AdjustVizField& a, std::vector<Event>& events) {
  auto* viz = find_viz_mut(s, a.viz_id);
  if (!viz) invalid("no chart '" + a.viz_id + "'", a.viz_id);
  const auto& pkg = *s.package;
  const auto widget = derive_viz_widget(viz->spec, pkg);
  const VizSlot* slot = nullptr;
  for (const auto& sl : widget.slots) {
    if (sl.channel == a.channel) slot = &sl;
  }
  if (!slot) invalid("chart '" + a.viz_id + "' has no adjustable " + std::string(to_string(a.channel)) + " field", a.viz_id);
  const auto& table = pkg.entity(viz->spec.primary_entity());
  const auto* field = table.find_field(a.field);
  if (!field) throw Error(ErrorCode::UnknownField, "entity '" + table.name + "' has no field '" + a.field + "'", a.viz_id);
  if (field->kind != slot->kind) {
    throw Error(ErrorCode::KindMismatch,
                "'" + a.field + "' is " + std::string(to_string(field->kind)) + ", slot needs " +
                    std::string(to_string(slot->kind)),
                a.viz_id);
  }
  if (a.field == slot->field) {
    events.push_back({"viz_updated", a.viz_id});
    return;
  }

  VizEntry candidate = *viz;
  const std::string old_field = slot->field;
  for (auto& e : candidate.spec.representation->mapping) {
    if (e.channel == a.channel) {
      e.field = a.field;
      e.field_kind = field->kind;
    }
  }
  // the grouping follows the swapped field so the chart keeps its shape
  for (auto& t : candidate.spec.transforms) {
    if (auto* g = std::get_if<Groupby>(&t)) {
      if (std::find(g->fields.begin(), g->fields.end(), a.field) != g->fields.end()) continue;
      std::replace(g->fields.begin(), g->fields.end(), old_field, a.field);
    }
  }
  auto violations = validate_spec(candidate.spec, pkg);
  if (!violations.empty()) {
    throw Error(ErrorCode::InvalidAction,
                std::string(to_string(violations.front().code)) + ": " + violations.front().reason,
                violations.front().locus);
  }
  *viz = std::move(candidate);
  bind_brush(s, *viz);
  reinject_all(s);
  events.push_back({"viz_updated", a.viz_id});
}

void do_remove_filter(SessionState& s, const RemoveFilter& a, std::vector<Event>& events) {
  if (!s.registry.erase(a.name)) invalid("no filter named '" + a.name + "'", a.name);
  s.origins.erase(a.name);
  reinject_all(s);
  events.push_back({"filter_removed", a.name});
}

void do_dismiss_viz(SessionState& s, const DismissViz& a, std::vector<Event>& events) {
  auto it = std::find_if(s.dashboard.begin(), s.dashboard.end(), [&](const VizEntry& v) { return v.viz_id == a.viz_id; });
  if (it == s.dashboard.end()) invalid("no chart '" + a.viz_id + "'", a.viz_id);
  if (it->brush && s.registry.erase(it->brush->selection)) {
    s.origins.erase(it->brush->selection);
    events.push_back({"filter_removed", it->brush->selection});
  }
  s.dashboard.erase(it);
  reinject_all(s);
  events.push_back({"viz_dismissed", a.viz_id});
}

void apply_unlogged(SessionState& s, const Action& action, std::vector<Event>& events) {
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, CreateViz>) {
          do_create_viz(s, a, events);
        } else if constexpr (std::is_same_v<T, CreateFilter>) {
          do_create_filter(s, a, events);
        } else if constexpr (std::is_same_v<T, AdjustFilter>) {
          do_adjust_filter(s, a, events);
        } else if constexpr (std::is_same_v<T, AdjustVizField>) {
          do_adjust_viz_field(s, a, events);
        } else if constexpr (std::is_same_v<T, Brush>) {
          do_brush(s, a, events);
        } else if constexpr (std::is_same_v<T, RemoveFilter>) {
          do_remove_filter(s, a, events);
        } else if constexpr (std::is_same_v<T, DismissViz>) {
          do_dismiss_viz(s, a, events);
        } else if constexpr (std::is_same_v<T, Download>) {
          s.package->entity(a.entity);
          events.push_back({"download", a.entity});
        } else {
          s.entries.push_back(Entry{Entry::Kind::user, a.message, {}, {}});
          s.entries.push_back(Entry{Entry::Kind::agent, a.reply, {}, json::object()});
          events.push_back({"reply", {}});
        }
      },
      action);
  ++s.version;
}

void check_version(const SessionState& state, std::optional<std::uint64_t> expected) {
  if (expected && *expected != state.version) {
    throw Error(ErrorCode::StaleVersion,
                "expected version " + std::to_string(*expected) + ", session is at " + std::to_string(state.version));
  }
}

}  // namespace

json to_json(const Action& action) {
  return std::visit(
      [](const auto& a) -> json {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, CreateViz>) {
          return {{"type", "create_viz"}, {"spec", to_json(a.spec)}};
        } else if constexpr (std::is_same_v<T, CreateFilter>) {
          return {{"type", "create_filter"}, {"selection", to_json(a.selection)}};
        } else if constexpr (std::is_same_v<T, AdjustFilter>) {
          json doc{{"type", "adjust_filter"}, {"name", a.name}};
          if (a.payload) doc["payload"] = to_json(*a.payload);
          if (a.entity) doc["entity"] = *a.entity;
          if (a.fields) doc["fields"] = *a.fields;
          return doc;
        } else if constexpr (std::is_same_v<T, AdjustVizField>) {
          return {{"type", "adjust_viz_field"},
                  {"viz_id", a.viz_id},
                  {"channel", std::string(to_string(a.channel))},
                  {"field", a.field}};
        } else if constexpr (std::is_same_v<T, Brush>) {
          json doc{{"type", "brush"}, {"viz_id", a.viz_id}};
          if (a.payload) doc["payload"] = to_json(*a.payload);
          else doc["clear"] = true;
          return doc;
        } else if constexpr (std::is_same_v<T, RemoveFilter>) {
          return {{"type", "remove_filter"}, {"name", a.name}};
        } else if constexpr (std::is_same_v<T, DismissViz>) {
          return {{"type", "dismiss_viz"}, {"viz_id", a.viz_id}};
        } else if constexpr (std::is_same_v<T, Download>) {
          return {{"type", "download"}, {"entity", a.entity}};
        } else {
          return {{"type", "converse"}, {"message", a.message}, {"reply", a.reply}};
        }
      },
      action);
}

Action action_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) {
    throw Error(ErrorCode::MalformedDocument, "action needs a string 'type'");
  }
  const auto type = doc["type"].get<std::string>();
  try {
    if (type == "create_viz") return CreateViz{parse_spec(doc.at("spec"))};
    if (type == "create_filter") return CreateFilter{selection_from_json(doc.at("selection"))};
    if (type == "adjust_filter") {
      AdjustFilter a;
      a.name = doc.at("name").get<std::string>();
      if (doc.contains("payload")) a.payload = payload_from_json(doc["payload"]);
      if (doc.contains("entity")) a.entity = doc["entity"].get<std::string>();
      if (doc.contains("fields")) a.fields = doc["fields"].get<std::vector<std::string>>();
      return a;
    }
    if (type == "adjust_viz_field") {
      return AdjustVizField{doc.at("viz_id").get<std::string>(), channel_from(doc.at("channel").get<std::string>()),
                            doc.at("field").get<std::string>()};
    }
    if (type == "brush") {
      Brush b;
      b.viz_id = doc.at("viz_id").get<std::string>();
      if (doc.contains("payload") && !doc["payload"].is_null()) {
        b.payload = payload_from_json(doc["payload"]);
      } else if (!doc.value("clear", false)) {
        throw Error(ErrorCode::MalformedDocument, "brush needs a payload or \"clear\": true");
      }
      return b;
    }
    if (type == "remove_filter") return RemoveFilter{doc.at("name").get<std::string>()};
    if (type == "dismiss_viz") return DismissViz{doc.at("viz_id").get<std::string>()};
    if (type == "download") return Download{doc.at("entity").get<std::string>()};
    if (type == "converse") return Converse{doc.at("message").get<std::string>(), doc.at("reply").get<std::string>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, "bad '" + type + "' action: " + e.what());
  }
  throw Error(ErrorCode::MalformedDocument, "unknown action type '" + type + "'");
}

ApplyResult apply_action(const SessionState& state, const Action& action, std::optional<std::uint64_t> expected_version) {
  check_version(state, expected_version);
  ApplyResult result{state, {}};
  apply_unlogged(result.state, action, result.events);
  result.state.action_log.push_back(to_json(action));
  return result;
}

ApplyResult apply_chat_turn(const SessionState& state, const ChatTurn& turn, std::optional<std::uint64_t> expected_version) {
  check_version(state, expected_version);
  ApplyResult result{state, {}};
  auto& s = result.state;
  std::vector<Action> actions;
  for (const auto& f : turn.filters) actions.emplace_back(CreateFilter{f});
  if (turn.viz) actions.emplace_back(CreateViz{*turn.viz});

  if (actions.empty()) {
    apply_unlogged(s, Converse{turn.message, turn.reply}, result.events);
    s.entries.back().trace = turn.trace;
  } else {
    s.entries.push_back(Entry{Entry::Kind::user, turn.message, {}, {}});
    s.entries.push_back(Entry{Entry::Kind::agent, turn.reply, {}, turn.trace});
    result.events.push_back({"reply", {}});
    for (const auto& a : actions) apply_unlogged(s, a, result.events);
  }
  json logged = json::array();
  for (const auto& a : actions) logged.push_back(to_json(a));
  s.action_log.push_back({{"type", "chat"}, {"message", turn.message}, {"reply", turn.reply}, {"actions", logged}});
  return result;
}

// --- widgets ---------------------------------------------------------------------------------

VizAdjust derive_viz_widget(const VizSpec& spec, const Package& package) {
  VizAdjust out;
  if (!spec.representation || spec.sources.empty()) return out;
  const auto* table = package.find_entity(spec.primary_entity());
  if (!table) return out;
  std::set<std::string> derived;
  for (const auto& t : spec.transforms) {
    if (const auto* r = std::get_if<Rollup>(&t)) derived.insert(r->out_field);
    if (const auto* c = std::get_if<Cdf>(&t)) derived.insert(c->out_fraction);
  }
  for (const auto& e : spec.representation->mapping) {
    if (derived.contains(e.field)) continue;
    const auto* field = table->find_field(e.field);
    if (!field || field->kind == FieldKind::identifier) continue;
    VizSlot slot{e.channel, e.field, field->kind, {}};
    for (const auto& f : table->fields) {
      if (f.kind == field->kind) slot.candidates.push_back(f.name);
    }
    out.slots.push_back(std::move(slot));
  }
  return out;
}

FieldDomain field_domain(const EntityTable& table, const std::string& field) {
  auto idx = table.field_index(field);
  if (!idx) throw Error(ErrorCode::UnknownField, "entity '" + table.name + "' has no field '" + field + "'");
  const auto stats = profile_field(table, *idx);
  FieldDomain d;
  d.field = field;
  d.min = stats.observed_min;
  d.max = stats.observed_max;
  if (stats.kind != FieldKind::quantitative) {
    for (const auto& [value, _] : stats.categories) d.categories.push_back(value);
    if (stats.null_count > 0) d.categories.emplace_back(std::monostate{});
  }
  return d;
}

FilterAdjust derive_filter_widget(const Selection& selection, SelectionOrigin origin, const Package& package) {
  FilterAdjust w;
  w.selection = selection.name;
  w.entity = selection.entity;
  w.fields = selection.fields;
  w.kind = selection.kind;
  w.origin = origin;
  w.payload = payload_of(selection);
  const auto& table = package.entity(selection.entity);
  for (const auto& f : selection.fields) w.domain.push_back(field_domain(table, f));
  return w;
}

std::string describe_payload(const Selection& selection, const Package& package) {
  const auto& table = package.entity(selection.entity);
  std::ostringstream out;
  if (selection.kind == SelectionKind::interval) {
    for (std::size_t i = 0; i < selection.fields.size(); ++i) {
      const auto d = field_domain(table, selection.fields[i]);
      const auto& iv = selection.intervals[i];
      if (i) out << "; ";
      out << selection.fields[i] << ": ";
      out << (!iv.min || (d.min && *iv.min <= *d.min) ? std::string("min") : format_number(*iv.min));
      out << " to ";
      out << (!iv.max || (d.max && *iv.max >= *d.max) ? std::string("max") : format_number(*iv.max));
    }
    return out.str();
  }
  bool first = true;
  for (const auto& tuple : selection.points) {
    if (!first) out << ", ";
    first = false;
    for (std::size_t i = 0; i < tuple.size(); ++i) {
      if (i) out << " / ";
      out << display_text(tuple[i]);
    }
  }
  return out.str();
}

// --- outputs -----------------------------------------------------------------------------------

std::string download(const SessionState& state, std::string_view entity) {
  const auto& table = state.package->entity(entity);
  const auto mask = surviving_rows(*state.package, state.registry, entity);
  std::ostringstream out;
  const auto header = table.field_names();
  csv::write_row(out, header, table.line_terminator);
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    if (mask[r]) csv::write_row(out, table.raw_rows[r], table.line_terminator);
  }
  return out.str();
}

namespace {

json domain_json(const FieldDomain& d) {
  json doc{{"field", d.field}};
  if (d.min) doc["min"] = *d.min;
  if (d.max) doc["max"] = *d.max;
  if (!d.categories.empty()) {
    json cats = json::array();
    for (const auto& c : d.categories) cats.push_back(cell_to_json(c));
    doc["categories"] = std::move(cats);
  }
  return doc;
}

json filter_json(const SessionState& s, const Selection& sel) {
  auto origin = s.origins.contains(sel.name) ? s.origins.at(sel.name) : SelectionOrigin::agent;
  auto doc = to_json(sel);
  doc["origin"] = std::string(origin_name(origin));
  doc["label"] = describe_payload(sel, *s.package);
  return doc;
}

json render_widget(const SessionState& s, const Entry& e) {
  if (e.kind == Entry::Kind::viz_widget) {
    json doc{{"type", "viz"}, {"viz_id", e.target}};
    const auto* viz = s.find_viz(e.target);
    doc["live"] = viz != nullptr;
    json slots = json::array();
    if (viz) {
      for (const auto& sl : derive_viz_widget(viz->spec, *s.package).slots) {
        slots.push_back({{"channel", std::string(to_string(sl.channel))},
                         {"field", sl.field},
                         {"kind", std::string(to_string(sl.kind))},
                         {"candidates", sl.candidates}});
      }
    }
    doc["slots"] = std::move(slots);
    return doc;
  }
  json doc{{"type", "filter"}, {"selection", e.target}};
  auto it = s.registry.find(e.target);
  doc["live"] = it != s.registry.end();
  if (it == s.registry.end()) return doc;
  auto origin = s.origins.contains(e.target) ? s.origins.at(e.target) : SelectionOrigin::agent;
  const auto w = derive_filter_widget(it->second, origin, *s.package);
  doc["entity"] = w.entity;
  doc["fields"] = w.fields;
  doc["kind"] = std::string(to_string(w.kind));
  doc["origin"] = std::string(origin_name(w.origin));
  doc["payload"] = to_json(w.payload);
  doc["label"] = describe_payload(it->second, *s.package);
  json domain = json::array();
  for (const auto& d : w.domain) domain.push_back(domain_json(d));
  doc["domain"] = std::move(domain);
  return doc;
}

}  // namespace

json render_state(const SessionState& s) {
  json entries = json::array();
  for (const auto& e : s.entries) {
    switch (e.kind) {
      case Entry::Kind::user: entries.push_back({{"kind", "user"}, {"text", e.text}}); break;
      case Entry::Kind::agent: entries.push_back({{"kind", "agent"}, {"text", e.text}, {"trace", e.trace}}); break;
      default: entries.push_back({{"kind", "widget"}, {"widget", render_widget(s, e)}});
    }
  }
  json dashboard = json::array();
  for (const auto& v : s.dashboard) {
    json item{{"viz_id", v.viz_id}, {"spec", to_json(v.spec)}};
    item["brush"] = v.brush ? brush_json(*v.brush) : json(nullptr);
    try {
      item["result"] = to_json(execute(v.spec, *s.package, s.registry));
    } catch (const Error& e) {
      item["error"] = {{"code", std::string(to_string(e.code()))}, {"message", e.message()}};
    }
    dashboard.push_back(std::move(item));
  }
  json filters = json::array();
  for (const auto& [name, sel] : s.registry) filters.push_back(filter_json(s, sel));
  return json{{"id", s.id},
              {"version", s.version},
              {"package", s.package->name},
              {"entries", std::move(entries)},
              {"dashboard", std::move(dashboard)},
              {"filters", std::move(filters)},
              {"counts", entity_counts(*s.package, s.registry)}};
}

json snapshot(const SessionState& s) {
  json entries = json::array();
  for (const auto& e : s.entries) {
    json doc{{"kind", std::string(entry_kind_name(e.kind))}};
    if (e.kind == Entry::Kind::user || e.kind == Entry::Kind::agent) doc["text"] = e.text;
    if (e.kind == Entry::Kind::agent) doc["trace"] = e.trace.is_null() ? json::object() : e.trace;
    if (e.kind == Entry::Kind::viz_widget || e.kind == Entry::Kind::filter_widget) doc["target"] = e.target;
    entries.push_back(std::move(doc));
  }
  json dashboard = json::array();
  for (const auto& v : s.dashboard) {
    dashboard.push_back({{"viz_id", v.viz_id},
                         {"spec", to_json(v.spec)},
                         {"brush", v.brush ? brush_json(*v.brush) : json(nullptr)}});
  }
  json registry = json::array();
  for (const auto& [name, sel] : s.registry) {
    auto doc = to_json(sel);
    doc["origin"] = std::string(origin_name(s.origins.contains(name) ? s.origins.at(name) : SelectionOrigin::agent));
    registry.push_back(std::move(doc));
  }
  return json{{"format", "vizlink-session"},
              {"schema_version", kSnapshotSchemaVersion},
              {"id", s.id},
              {"package", s.package->name},
              {"version", s.version},
              {"counters", {{"viz", s.next_viz}, {"filter", s.next_filter}}},
              {"entries", std::move(entries)},
              {"dashboard", std::move(dashboard)},
              {"registry", std::move(registry)},
              {"actions", s.action_log}};
}

SessionState restore(const json& document, std::shared_ptr<const Package> package) {
  if (!document.is_object() || document.value("format", "") != "vizlink-session") {
    throw Error(ErrorCode::MalformedDocument, "not a session snapshot");
  }
  if (!document.contains("schema_version") || !document["schema_version"].is_number_integer()) {
    throw Error(ErrorCode::MalformedDocument, "snapshot lacks schema_version");
  }
  if (document["schema_version"].get<int>() > kSnapshotSchemaVersion) {
    throw Error(ErrorCode::VersionSkew, "snapshot schema " + std::to_string(document["schema_version"].get<int>()) +
                                            " is newer than supported " + std::to_string(kSnapshotSchemaVersion));
  }
  if (!package) throw Error(ErrorCode::InvalidAction, "restore needs a package");
  try {
    if (document.at("package").get<std::string>() != package->name) {
      throw Error(ErrorCode::InvalidAction, "snapshot was taken against package '" +
                                                document.at("package").get<std::string>() + "'");
    }
    SessionState s = new_session(document.at("id").get<std::string>(), package);
    s.version = document.at("version").get<std::uint64_t>();
    s.next_viz = document.at("counters").at("viz").get<std::uint64_t>();
    s.next_filter = document.at("counters").at("filter").get<std::uint64_t>();
    for (const auto& doc : document.at("registry")) {
      auto sel = selection_from_json(doc);
      s.origins[sel.name] = origin_from(doc.at("origin").get<std::string>());
      s.registry = update_selection(std::move(s.registry), std::move(sel), *package);
    }
    std::set<std::string> ids;
    for (const auto& doc : document.at("dashboard")) {
      VizEntry v;
      v.viz_id = doc.at("viz_id").get<std::string>();
      if (!ids.insert(v.viz_id).second) throw Error(ErrorCode::MalformedDocument, "duplicate chart id " + v.viz_id);
      v.spec = parse_spec(doc.at("spec"));
      if (!doc.at("brush").is_null()) v.brush = brush_from_json(v.viz_id, doc["brush"]);
      auto violations = validate_spec(v.spec, *package);
      if (!violations.empty()) {
        throw Error(ErrorCode::MalformedDocument, "chart " + v.viz_id + ": " + violations.front().reason,
                    violations.front().locus);
      }
      s.dashboard.push_back(std::move(v));
    }
    for (const auto& doc : document.at("entries")) {
      Entry e;
      e.kind = entry_kind_from(doc.at("kind").get<std::string>());
      if (e.kind == Entry::Kind::user || e.kind == Entry::Kind::agent) e.text = doc.at("text").get<std::string>();
      if (e.kind == Entry::Kind::agent) e.trace = doc.value("trace", json::object());
      if (e.kind == Entry::Kind::viz_widget || e.kind == Entry::Kind::filter_widget) {
        e.target = doc.at("target").get<std::string>();
      }
      s.entries.push_back(std::move(e));
    }
    for (const auto& a : document.at("actions")) s.action_log.push_back(a);
    for (const auto& v : s.dashboard) execute(v.spec, *package, s.registry);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("bad snapshot: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::VersionSkew || e.code() == ErrorCode::InvalidAction) throw;
    throw Error(ErrorCode::MalformedDocument, "bad snapshot: " + std::string(e.what()), e.locus());
  }
}

std::string snapshot_digest(const json& snap) {
  json copy = snap;
  copy.erase("id");
  const std::string text = copy.dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace vizlink
