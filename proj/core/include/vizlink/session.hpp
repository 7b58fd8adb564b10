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

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizlink/dataflow.hpp"
#include "vizlink/datapackage.hpp"
#include "vizlink/grammar.hpp"
#include "vizlink/linking.hpp"
#include "vizlink/selection.hpp"

namespace vizlink {

/// Version of the snapshot document format written by snapshot().
inline constexpr int kSnapshotSchemaVersion = 1;

struct VizEntry {
  std::string viz_id;
  VizSpec spec;
  std::optional<BrushBinding> brush;
  bool operator==(const VizEntry&) const = default;
};

enum class SelectionOrigin { agent, brush };

/// Conversation entry. Widget entries reference live state by id and render from it.
struct Entry {
  enum class Kind { user, agent, viz_widget, filter_widget };
  Kind kind = Kind::user;
  std::string text;    // user/agent message
  std::string target;  // viz id or selection name for widgets
  nlohmann::json trace;  // structured agent outputs disclosed with an agent reply
  bool operator==(const Entry&) const = default;
};

struct SessionState {
  std::string id;
  std::shared_ptr<const Package> package;
  std::vector<Entry> entries;
  std::vector<VizEntry> dashboard;
  SelectionRegistry registry;
  std::map<std::string, SelectionOrigin> origins;
  std::vector<nlohmann::json> action_log;
  std::uint64_t version = 0;
  std::uint64_t next_viz = 1;
  std::uint64_t next_filter = 1;

  const VizEntry* find_viz(std::string_view viz_id) const noexcept;
};

SessionState new_session(std::string id, std::shared_ptr<const Package> package);

// --- actions -----------------------------------------------------------------------------

struct CreateViz {
  VizSpec spec;
};
struct CreateFilter {
  /// An empty name is replaced by the next "filter-N".
  Selection selection;
};
struct AdjustFilter {
  std::string name;
  std::optional<Payload> payload;
  /// Retargeting resets the payload to the new field's full observed domain before `payload` applies.
  std::optional<std::string> entity;
  std::optional<std::vector<std::string>> fields;
};
struct AdjustVizField {
  std::string viz_id;
  Channel channel = Channel::x;
  std::string field;
};
struct Brush {
  std::string viz_id;
  /// nullopt clears the brush, resetting its selection to the full domain.
  std::optional<Payload> payload;
};
struct RemoveFilter {
  std::string name;
};
struct DismissViz {
  std::string viz_id;
};
struct Download {
  std::string entity;
};
/// A chat turn that produced no dashboard action.
struct Converse {
  std::string message;
  std::string reply;
};

using Action = std::variant<CreateViz, CreateFilter, AdjustFilter, AdjustVizField, Brush, RemoveFilter, DismissViz,
                            Download, Converse>;

nlohmann::json to_json(const Action& action);
/// Throws Error(MalformedDocument) and the grammar parse errors for embedded specs.
Action action_from_json(const nlohmann::json& doc);

struct Event {
  std::string type;    // viz_created, widget_created, filter_created, filter_updated, ...
  std::string target;  // viz id, selection name, or entity
  bool operator==(const Event&) const = default;
};

struct ApplyResult {
  SessionState state;
  std::vector<Event> events;
};

/// Validates and applies one action, incrementing the version by one. The input state is never
/// modified. Throws Error(StaleVersion | InvalidAction | KindMismatch | UnknownField | UnknownEntity
/// | InvalidInterval).
ApplyResult apply_action(const SessionState& state, const Action& action,
                         std::optional<std::uint64_t> expected_version = std::nullopt);

/// Agent results for one chat message, ready to apply.
struct ChatTurn {
  std::string message;
  std::string reply;
  std::vector<Selection> filters;
  std::optional<VizSpec> viz;
  nlohmann::json trace = nlohmann::json::object();
};

/// Appends the user message, registers filters before creating the chart (so it is born filtered),
/// then appends the agent reply. All-or-nothing.
ApplyResult apply_chat_turn(const SessionState& state, const ChatTurn& turn,
                            std::optional<std::uint64_t> expected_version = std::nullopt);

// --- widgets -----------------------------------------------------------------------------

struct VizSlot {
  Channel channel = Channel::x;
  std::string field;
  FieldKind kind = FieldKind::nominal;
  std::vector<std::string> candidates;
  bool operator==(const VizSlot&) const = default;
};

struct VizAdjust {
  std::string viz_id;
  std::vector<VizSlot> slots;
  bool operator==(const VizAdjust&) const = default;
};

struct FieldDomain {
  std::string field;
  std::optional<double> min;
  std::optional<double> max;
  std::vector<Cell> categories;  // null included when the field has missing values
  bool operator==(const FieldDomain&) const = default;
};

struct FilterAdjust {
  std::string selection;
  std::string entity;
  std::vector<std::string> fields;
  SelectionKind kind = SelectionKind::interval;
  SelectionOrigin origin = SelectionOrigin::agent;
  Payload payload;
  std::vector<FieldDomain> domain;
  bool operator==(const FilterAdjust&) const = default;
};

using Widget = std::variant<VizAdjust, FilterAdjust>;

/// One dropdown slot per encoding of a source field; candidates are every non-identifier field of
/// the same entity and kind.
VizAdjust derive_viz_widget(const VizSpec& spec, const Package& package);

/// Filter widget rendered from the registry entry and the field statistics.
FilterAdjust derive_filter_widget(const Selection& selection, SelectionOrigin origin, const Package& package);

/// Observed domain of a field, used for widget ranges and for resetting retargeted filters.
FieldDomain field_domain(const EntityTable& table, const std::string& field);

/// "18 to max", "min to 4000", "Female, Male".
std::string describe_payload(const Selection& selection, const Package& package);

// --- outputs -----------------------------------------------------------------------------

/// CSV of the rows of `entity` surviving the registry, original column order, header included.
std::string download(const SessionState& state, std::string_view entity);

/// Full state document: entries with rendered widgets, dashboard with result tables, filters, counts.
nlohmann::json render_state(const SessionState& state);

/// Versioned, deterministic session document.
nlohmann::json snapshot(const SessionState& state);

/// Rebuilds a session from a snapshot. Throws Error(VersionSkew | MalformedDocument | InvalidAction).
SessionState restore(const nlohmann::json& document, std::shared_ptr<const Package> package);

/// SHA-256 (hex) of the snapshot with its session id removed.
std::string snapshot_digest(const nlohmann::json& snapshot);

}  // namespace vizlink
