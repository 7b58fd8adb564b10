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

#include "vizlink/agents.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "vizlink/assets.hpp"
#include "vizlink/json_schema.hpp"

namespace vizlink {

using nlohmann::json;

// --- context ---------------------------------------------------------------------------------

const ContextEntity* AgentContext::find_entity(std::string_view name) const noexcept {
  for (const auto& e : entities) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const ContextField* AgentContext::find_field(std::string_view entity, std::string_view field) const noexcept {
  const auto* e = find_entity(entity);
  if (!e) return nullptr;
  for (const auto& f : e->fields) {
    if (f.name == field) return &f;
  }
  return nullptr;
}

namespace {

std::string render_context(const AgentContext& ctx) {
  std::ostringstream out;
  for (const auto& e : ctx.entities) {
    out << "entity " << e.name << " (" << e.rows << " rows)";
    if (!e.description.empty()) out << ": " << e.description;
    out << "\n";
    for (const auto& f : e.fields) {
      out << "  - " << f.name << " (" << to_string(f.kind) << ")";
      if (!f.description.empty()) out << ": " << f.description;
      if (f.kind == FieldKind::quantitative) {
        if (f.min && f.max) out << "; range " << format_number(*f.min) << " to " << format_number(*f.max);
      } else {
        out << "; categories: ";
        for (std::size_t i = 0; i < f.categories.size(); ++i) {
          if (i) out << ", ";
          out << (is_null(f.categories[i]) ? std::string("null") : display_text(f.categories[i]));
        }
      }
      out << "\n";
    }
  }
  if (!ctx.relations.empty()) {
    out << "relations:\n";
    for (const auto& r : ctx.relations) {
      out << "  - " << r.from_entity << "(";
      for (std::size_t i = 0; i < r.from_fields.size(); ++i) out << (i ? ", " : "") << r.from_fields[i];
      out << ") -> " << r.to_entity << "(";
      for (std::size_t i = 0; i < r.to_fields.size(); ++i) out << (i ? ", " : "") << r.to_fields[i];
      out << ")\n";
    }
  }
  return out.str();
}

}  // namespace

AgentContext build_context(const Package& package, const ContextOptions& options) {
  AgentContext ctx;
  ctx.relations = package.relations;
  for (const auto& table : package.entities) {
    ContextEntity e{table.name, table.description, table.row_count(), {}};
    for (std::size_t c = 0; c < table.fields.size(); ++c) {
      const auto& schema = table.fields[c];
      if (schema.kind == FieldKind::identifier) {
        ctx.excluded.push_back(table.name + "." + schema.name);
        continue;
      }
      const auto stats = profile_field(table, c);
      if (schema.kind != FieldKind::quantitative && stats.distinct_count > options.category_threshold) {
        ctx.excluded.push_back(table.name + "." + schema.name);
        continue;
      }
      ContextField f{schema.name, schema.kind, schema.description.value_or(""), stats.observed_min, stats.observed_max, {}};
      if (schema.kind != FieldKind::quantitative) {
        for (const auto& [value, _] : stats.categories) f.categories.push_back(value);
        if (stats.null_count > 0) f.categories.emplace_back(std::monostate{});
      }
      e.fields.push_back(std::move(f));
    }
    ctx.entities.push_back(std::move(e));
  }
  ctx.text = render_context(ctx);
  if (ctx.text.size() > options.budget_bytes) {
    throw Error(ErrorCode::ContextBudgetExceeded, "agent context is " + std::to_string(ctx.text.size()) +
                                                      " bytes, budget is " + std::to_string(options.budget_bytes));
  }
  return ctx;
}

// --- backends --------------------------------------------------------------------------------

void ScriptedBackend::add(std::string agent, std::string message, std::vector<std::string> outputs) {
  if (outputs.empty()) throw Error(ErrorCode::MalformedDocument, "scripted entry needs at least one output");
  script_[{std::move(agent), std::move(message)}] = Slot{std::move(outputs), 0};
}

std::string ScriptedBackend::complete(const Prompt& prompt) {
  auto it = script_.find({prompt.agent, prompt.message});
  if (it == script_.end()) {
    throw Error(ErrorCode::ScriptMiss, "no scripted " + prompt.agent + " output for message \"" + prompt.message + "\"");
  }
  auto& slot = it->second;
  const auto& out = slot.outputs[std::min(slot.next, slot.outputs.size() - 1)];
  ++slot.next;
  return out;
}

RemoteBackend::RemoteBackend(RemoteOptions options) : options_(std::move(options)) {
  if (options_.base_url.empty()) throw Error(ErrorCode::BackendFailure, "remote backend needs a base URL");
  if (options_.model.empty()) throw Error(ErrorCode::BackendFailure, "remote backend needs a model name");
}

std::string RemoteBackend::complete(const Prompt& prompt) {
  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (const char* token = std::getenv(options_.token_env.c_str()); token && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  json body{{"model", options_.model},
            {"temperature", 0},
            {"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})}};
  if (prompt.schema) {
    body["response_format"] = {{"type", "json_schema"},
                               {"json_schema", {{"name", prompt.agent}, {"strict", false}, {"schema", *prompt.schema}}}};
  }
  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(options_.path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool slow = std::chrono::steady_clock::now() - started >= options_.timeout;
    if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && slow)) {
      throw Error(ErrorCode::BackendTimeout, "completion request timed out after " +
                                                 std::to_string(options_.timeout.count()) + " s");
    }
    throw Error(ErrorCode::BackendFailure, "completion request failed: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendFailure, "completion endpoint answered HTTP " + std::to_string(res->status));
  }
  try {
    const auto doc = json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BackendFailure, std::string("unexpected completion response: ") + e.what());
  }
}

// --- agents ----------------------------------------------------------------------------------

AgentFailure::AgentFailure(std::string agent, std::string reason, json attempts)
    : Error(ErrorCode::SchemaViolation, agent + " output rejected: " + reason, agent), attempts_(std::move(attempts)) {}

const json& agent_schema(std::string_view agent) {
  static const json orchestrator = json::parse(asset("schemas/orchestrator.schema.json"));
  static const json filter = json::parse(asset("schemas/filter.schema.json"));
  if (agent == "orchestrator") return orchestrator;
  if (agent == "filter") return filter;
  if (agent == "visualization") return grammar_schema();
  throw Error(ErrorCode::InvalidAction, "unknown agent '" + std::string(agent) + "'");
}

std::string render_prompt(std::string_view template_text, const AgentContext& context, std::string_view message) {
  std::string out(template_text);
  auto replace = [&out](std::string_view token, std::string_view value) {
    for (auto pos = out.find(token); pos != std::string::npos; pos = out.find(token, pos + value.size())) {
      out.replace(pos, token.size(), value);
    }
  };
  replace("{{context}}", context.text);
  replace("{{message}}", message);
  return out;
}

FilterCommand resolve_filter(FilterCommand command, const AgentContext& context) {
  const std::string locus = command.entity + "." + command.field;
  if (!context.find_entity(command.entity)) {
    throw Error(ErrorCode::UnresolvableField, "entity '" + command.entity + "' is not in the data description", locus);
  }
  const auto* field = context.find_field(command.entity, command.field);
  if (!field) {
    throw Error(ErrorCode::UnresolvableField, "field '" + locus + "' is not in the data description", locus);
  }
  if (command.kind == FilterKind::interval) {
    if (field->kind != FieldKind::quantitative) {
      throw Error(ErrorCode::KindMismatch, "interval filter on non-quantitative field", locus);
    }
    if (!command.values.empty()) throw Error(ErrorCode::KindMismatch, "interval filter carries point values", locus);
    if (!command.min) command.min = field->min;
    if (!command.max) command.max = field->max;
    if (command.min && command.max && *command.min > *command.max) {
      throw Error(ErrorCode::InvalidInterval, "interval minimum exceeds maximum", locus);
    }
  } else {
    if (field->kind == FieldKind::quantitative) {
      throw Error(ErrorCode::KindMismatch, "point filter on quantitative field", locus);
    }
    if (command.min || command.max) throw Error(ErrorCode::KindMismatch, "point filter carries bounds", locus);
    if (command.values.empty()) throw Error(ErrorCode::KindMismatch, "point filter lists no values", locus);
    for (const auto& v : command.values) {
      const bool known = std::any_of(field->categories.begin(), field->categories.end(),
                                     [&](const Cell& c) { return compare_cells(c, v) == 0; });
      if (!known) {
        throw Error(ErrorCode::UnresolvableField, "value " + display_text(v) + " does not occur in '" + locus + "'", locus);
      }
    }
  }
  return command;
}

Selection to_selection(const FilterCommand& command) {
  Selection s;
  s.entity = command.entity;
  s.fields = {command.field};
  if (command.kind == FilterKind::interval) {
    s.kind = SelectionKind::interval;
    s.intervals = {Interval{command.min, command.max}};
  } else {
    s.kind = SelectionKind::point;
    for (const auto& v : command.values) s.points.push_back(Key{v});
  }
  canonicalize(s);
  return s;
}

json to_json(const Route& route) {
  return {{"wants_filter", route.wants_filter}, {"wants_viz", route.wants_viz}, {"reply", route.reply}};
}

json to_json(const FilterCommand& command) {
  json doc{{"entity", command.entity},
           {"field", command.field},
           {"kind", command.kind == FilterKind::interval ? "interval" : "point"}};
  if (command.kind == FilterKind::interval) {
    doc["min"] = command.min ? json(*command.min) : json(nullptr);
    doc["max"] = command.max ? json(*command.max) : json(nullptr);
  } else {
    json values = json::array();
    for (const auto& v : command.values) values.push_back(cell_to_json(v));
    doc["values"] = std::move(values);
  }
  return doc;
}

namespace {

std::string_view template_for(const std::string& agent) {
  if (agent == "orchestrator") return asset("prompts/orchestrator.txt");
  if (agent == "filter") return asset("prompts/filter.txt");
  return asset("prompts/visualization.txt");
}

/// Asks the backend, checks the document with `interpret`, and re-prompts once on rejection.
template <typename Interpret>
auto call_agent(CompletionBackend& backend, const AgentContext& context, const std::string& agent,
                const std::string& message, json& trace, Interpret interpret) {
  const auto& schema_doc = agent_schema(agent);
  const JsonSchema schema(schema_doc);
  const std::string base = render_prompt(template_for(agent), context, message);
  Prompt prompt{agent, message, base, &schema_doc};
  json attempts = json::array();
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string raw = backend.complete(prompt);
    std::string reason;
    try {
      const auto doc = json::parse(raw);
      const auto issues = schema.validate(doc);
      if (!issues.empty()) {
        reason = issues.front().reason + (issues.front().locus.empty() ? "" : " at " + issues.front().locus);
      } else {
        auto value = interpret(doc);
        attempts.push_back({{"raw", raw}});
        trace["attempts"][agent] = attempts;
        return value;
      }
    } catch (const json::parse_error& e) {
      reason = std::string("not a JSON document: ") + e.what();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ScriptMiss || e.code() == ErrorCode::BackendTimeout ||
          e.code() == ErrorCode::BackendFailure) {
        throw;
      }
      reason = std::string(to_string(e.code())) + ": " + e.message();
    }
    attempts.push_back({{"raw", raw}, {"rejected", reason}});
    prompt.text = base + "\n\nYour previous output was rejected: " + reason +
                  "\nReturn a corrected JSON document that follows the required structure.";
  }
  trace["attempts"][agent] = attempts;
  throw AgentFailure(agent, attempts.back()["rejected"].get<std::string>(), attempts);
}

}  // namespace

Route orchestrate(CompletionBackend& backend, const AgentContext& context, const std::string& message, json& trace) {
  auto route = call_agent(backend, context, "orchestrator", message, trace, [](const json& doc) {
    Route r{doc.at("wants_filter").get<bool>(), doc.at("wants_viz").get<bool>(), doc.at("reply").get<std::string>()};
    if (!r.wants_filter && !r.wants_viz && r.reply.empty()) {
      throw Error(ErrorCode::SchemaViolation, "a conversational route needs a reply");
    }
    return r;
  });
  trace["route"] = to_json(route);
  return route;
}

std::vector<FilterCommand> run_filter_agent(CompletionBackend& backend, const AgentContext& context,
                                            const std::string& message, json& trace) {
  auto commands = call_agent(backend, context, "filter", message, trace, [&](const json& doc) {
    std::vector<FilterCommand> out;
    for (const auto& f : doc.at("filters")) {
      FilterCommand c;
      c.entity = f.at("entity").get<std::string>();
      c.field = f.at("field").get<std::string>();
      c.kind = f.at("kind").get<std::string>() == "interval" ? FilterKind::interval : FilterKind::point;
      if (f.contains("min") && !f["min"].is_null()) c.min = f["min"].get<double>();
      if (f.contains("max") && !f["max"].is_null()) c.max = f["max"].get<double>();
      if (f.contains("values")) {
        for (const auto& v : f["values"]) c.values.push_back(cell_from_json(v));
      }
      out.push_back(resolve_filter(std::move(c), context));
    }
    return out;
  });
  json listed = json::array();
  for (const auto& c : commands) listed.push_back(to_json(c));
  trace["filters"] = std::move(listed);
  return commands;
}

VizSpec run_viz_agent(CompletionBackend& backend, const AgentContext& context, const Package& package,
                      const std::string& message, json& trace) {
  auto spec = call_agent(backend, context, "visualization", message, trace, [&](const json& doc) {
    auto s = parse_spec(doc);
    auto violations = validate_spec(s, package);
    if (!violations.empty()) {
      throw Error(violations.front().code, violations.front().reason, violations.front().locus);
    }
    return s;
  });
  trace["viz"] = to_json(spec);
  return spec;
}

ChatTurn run_pipeline(CompletionBackend& backend, const AgentContext& context, const Package& package,
                      const std::string& message) {
  ChatTurn turn;
  turn.message = message;
  turn.trace = json::object();
  const auto route = orchestrate(backend, context, message, turn.trace);
  turn.reply = route.reply;
  if (route.wants_filter) {
    for (const auto& c : run_filter_agent(backend, context, message, turn.trace)) turn.filters.push_back(to_selection(c));
  }
  if (route.wants_viz) turn.viz = run_viz_agent(backend, context, package, message, turn.trace);
  return turn;
}

}  // namespace vizlink
