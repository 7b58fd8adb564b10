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

#include "vizlink/service.hpp"

#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#include "vizlink/json_schema.hpp"

namespace vizlink {

using nlohmann::json;

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownEntity:
      return 404;
    case ErrorCode::StaleVersion:
      return 409;
    case ErrorCode::BackendTimeout:
      return 504;
    case ErrorCode::BackendFailure:
    case ErrorCode::ScriptMiss:
      return 502;
    default:
      return 422;
  }
}

namespace {

Response json_response(int status, const json& body) { return Response{status, "application/json", body.dump()}; }

Response error_response(int status, std::string_view code, const std::string& message, const json& extra = {}) {
  json body{{"code", code}, {"message", message}};
  if (extra.is_object()) body.update(extra);
  return json_response(status, body);
}

Response error_response(const Error& e) {
  json extra = json::object();
  if (!e.locus().empty()) extra["locus"] = e.locus();
  if (const auto* failure = dynamic_cast<const AgentFailure*>(&e)) extra["attempts"] = failure->attempts();
  return error_response(http_status(e.code()), to_string(e.code()), e.message(), extra);
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : path) {
    if (c == '/') {
      if (!current.empty()) parts.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) parts.push_back(std::move(current));
  return parts;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  auto doc = json::parse(body);  // json::parse_error handled by dispatch
  if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "request body must be a JSON object");
  return doc;
}

std::optional<std::uint64_t> version_of(const json& body, const std::map<std::string, std::string>& query,
                                        bool required) {
  if (body.contains("version")) {
    if (!body["version"].is_number_integer() || body["version"].get<long long>() < 0) throw Error(ErrorCode::MalformedDocument, "version must be a non-negative integer");
    return body["version"].get<std::uint64_t>();
  }
  if (auto it = query.find("version"); it != query.end()) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(it->second, &used);
      if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::MalformedDocument, "version must be a non-negative integer");
  }
  if (required) throw Error(ErrorCode::MalformedDocument, "this request must carry the session version it was based on");
  return std::nullopt;
}

json events_json(const std::vector<Event>& events) {
  json out = json::array();
  for (const auto& e : events) out.push_back({{"type", e.type}, {"target", e.target}});
  return out;
}

Payload payload_field(const json& body) {
  if (!body.contains("payload")) throw Error(ErrorCode::MalformedDocument, "request needs a payload");
  return payload_from_json(body["payload"]);
}

}  // namespace

Service::Service(std::shared_ptr<const Package> package, std::shared_ptr<CompletionBackend> backend,
                 ServiceOptions options)
    : package_(std::move(package)), backend_(std::move(backend)), options_(std::move(options)) {
  if (!package_) throw Error(ErrorCode::InvalidAction, "service needs a package");
  context_ = build_context(*package_, options_.context);
  if (!options_.snapshot_dir) return;
  std::filesystem::create_directories(*options_.snapshot_dir);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(*options_.snapshot_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream in(file);
    auto doc = json::parse(in);
    if (doc.value("package", "") != package_->name) continue;
    auto slot = std::make_shared<Slot>();
    slot->state = restore(doc, package_);
    sessions_[slot->state.id] = std::move(slot);
  }
}

std::vector<std::string> Service::session_ids() const {
  std::lock_guard lock(sessions_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

std::shared_ptr<Service::Slot> Service::find(const std::string& id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
  return it->second;
}

std::string Service::fresh_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  std::ostringstream out;
  out << std::hex << rng() << ++id_counter_;
  return out.str().substr(0, 20);
}

void Service::persist(const SessionState& state) const {
  if (!options_.snapshot_dir) return;
  const auto target = *options_.snapshot_dir / (state.id + ".json");
  const auto tmp = *options_.snapshot_dir / (state.id + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << snapshot(state).dump(1);
    if (!out) throw Error(ErrorCode::InvalidAction, "could not write snapshot " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

Response Service::dispatch(const Request& request) {
  try {
    return route(request);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return error_response(400, "MalformedDocument", std::string("malformed request body: ") + e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

Response Service::create_session(const json& body) {
  if (body.contains("package") && body["package"] != package_->name) {
    throw Error(ErrorCode::UnknownEntity, "this service serves package '" + package_->name + "'");
  }
  auto slot = std::make_shared<Slot>();
  {
    std::lock_guard lock(sessions_mutex_);
    std::string id;
    do {
      id = fresh_id();
    } while (sessions_.contains(id));
    slot->state = new_session(id, package_);
    sessions_[id] = slot;
  }
  std::lock_guard lock(slot->state_mutex);
  persist(slot->state);
  return json_response(201, {{"id", slot->state.id},
                             {"version", slot->state.version},
                             {"counts", entity_counts(*package_, slot->state.registry)}});
}

Response Service::mutate(Slot& slot, const Action& action, std::optional<std::uint64_t> version) {
  std::lock_guard lock(slot.state_mutex);
  auto result = apply_action(slot.state, action, version);
  persist(result.state);
  slot.state = std::move(result.state);
  return json_response(200, {{"version", slot.state.version},
                             {"events", events_json(result.events)},
                             {"state", render_state(slot.state)}});
}

Response Service::chat(Slot& slot, const json& body) {
  if (!body.contains("text") || !body["text"].is_string() || body["text"].get<std::string>().empty()) {
    throw Error(ErrorCode::MalformedDocument, "chat needs a non-empty \"text\"");
  }
  const auto text = body["text"].get<std::string>();
  const auto version = version_of(body, {}, false);
  std::lock_guard pipeline(slot.chat_mutex);
  {
    std::lock_guard lock(slot.state_mutex);
    if (version && *version != slot.state.version) {
      throw Error(ErrorCode::StaleVersion, "expected version " + std::to_string(*version) + ", session is at " +
                                               std::to_string(slot.state.version));
    }
  }
  ChatTurn turn;
  {
    std::lock_guard lock(backend_mutex_);
    turn = run_pipeline(*backend_, context_, *package_, text);
  }
  std::lock_guard lock(slot.state_mutex);
  auto result = apply_chat_turn(slot.state, turn);
  persist(result.state);
  slot.state = std::move(result.state);
  return json_response(200, {{"version", slot.state.version},
                             {"events", events_json(result.events)},
                             {"reply", turn.reply},
                             {"trace", turn.trace},
                             {"state", render_state(slot.state)}});
}

Response Service::route(const Request& request) {
  const auto parts = split_path(request.path);
  const auto& method = request.method;
  if (parts.size() == 2 && parts[0] == "schema" && parts[1] == "grammar" && method == "GET") {
    return json_response(200, grammar_schema());
  }
  if (parts.empty() || parts[0] != "sessions") return error_response(404, "NotFound", "no route " + request.path);
  if (parts.size() == 1) {
    if (method != "POST") return error_response(405, "MethodNotAllowed", method + " " + request.path);
    return create_session(parse_body(request.body));
  }
  const auto slot = find(parts[1]);
  const auto body = parse_body(request.body);
  auto not_allowed = [&] { return error_response(405, "MethodNotAllowed", method + " " + request.path); };

  if (parts.size() == 3) {
    const auto& leaf = parts[2];
    if (leaf == "state") {
      if (method != "GET") return not_allowed();
      std::lock_guard lock(slot->state_mutex);
      return json_response(200, render_state(slot->state));
    }
    if (leaf == "counts") {
      if (method != "GET") return not_allowed();
      std::lock_guard lock(slot->state_mutex);
      return json_response(200, {{"version", slot->state.version},
                                 {"counts", entity_counts(*package_, slot->state.registry)}});
    }
    if (leaf == "chat") {
      if (method != "POST") return not_allowed();
      return chat(*slot, body);
    }
    if (leaf == "download") {
      if (method != "GET") return not_allowed();
      auto it = request.query.find("entity");
      if (it == request.query.end()) throw Error(ErrorCode::MalformedDocument, "download needs ?entity=");
      std::lock_guard lock(slot->state_mutex);
      auto result = apply_action(slot->state, Download{it->second});
      std::string csv = download(result.state, it->second);
      persist(result.state);
      slot->state = std::move(result.state);
      return Response{200, "text/csv; charset=utf-8", std::move(csv)};
    }
  }
  if (parts.size() == 4 && parts[2] == "filters") {
    const auto& name = parts[3];
    if (method == "PATCH") {
      AdjustFilter a;
      a.name = name;
      if (body.contains("payload")) a.payload = payload_field(body);
      if (body.contains("entity")) a.entity = body["entity"].get<std::string>();
      if (body.contains("fields")) a.fields = body["fields"].get<std::vector<std::string>>();
      if (!a.payload && !a.entity && !a.fields) {
        throw Error(ErrorCode::MalformedDocument, "filter update needs payload, entity or fields");
      }
      return mutate(*slot, a, version_of(body, request.query, true));
    }
    if (method == "DELETE") return mutate(*slot, RemoveFilter{name}, version_of(body, request.query, true));
    return not_allowed();
  }
  if (parts.size() == 4 && parts[2] == "viz" && method == "DELETE") {
    return mutate(*slot, DismissViz{parts[3]}, version_of(body, request.query, true));
  }
  if (parts.size() == 5 && parts[2] == "viz") {
    const auto& viz_id = parts[3];
    if (parts[4] == "brush") {
      if (method != "POST") return not_allowed();
      Brush b;
      b.viz_id = viz_id;
      if (body.contains("payload") && !body["payload"].is_null()) {
        b.payload = payload_field(body);
      } else if (!body.value("clear", false)) {
        throw Error(ErrorCode::MalformedDocument, "brush needs a payload or \"clear\": true");
      }
      return mutate(*slot, b, version_of(body, request.query, true));
    }
    if (parts[4] == "fields") {
      if (method != "PATCH") return not_allowed();
      auto action = action_from_json({{"type", "adjust_viz_field"},
                                      {"viz_id", viz_id},
                                      {"channel", body.at("channel")},
                                      {"field", body.at("field")}});
      return mutate(*slot, action, version_of(body, request.query, true));
    }
  }
  return error_response(404, "NotFound", "no route " + method + " " + request.path);
}

// --- transcripts -----------------------------------------------------------------------------

Transcript parse_transcript(const json& doc, const std::filesystem::path& base_dir) {
  auto fail = [](const std::string& where, const std::string& reason) {
    throw Error(ErrorCode::SchemaViolation, where + ": " + reason, where);
  };
  if (!doc.is_object() || doc.value("format", "") != "vizlink-transcript") fail("transcript", "not a transcript document");
  if (doc.value("version", 0) != 1) fail("transcript", "unsupported transcript version");
  Transcript t;
  if (!doc.contains("package") || !doc["package"].is_string()) fail("transcript", "missing package path");
  t.package_path = base_dir / doc["package"].get<std::string>();
  t.session_id = doc.value("session_id", std::string("replay"));
  if (doc.contains("expected_digest") && !doc["expected_digest"].is_null()) {
    t.expected_digest = doc["expected_digest"].get<std::string>();
  }
  std::map<std::string, json> seen_outputs;  // message -> outputs, scripted keys must agree
  const auto& steps = doc.contains("steps") ? doc["steps"] : json::array();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string where = "step " + std::to_string(i + 1);
    const auto& s = steps[i];
    TranscriptStep step;
    if (!s.is_object()) fail(where, "step must be an object");
    if (s.contains("chat") == s.contains("action")) fail(where, "step needs exactly one of chat or action");
    if (s.contains("expect_counts")) {
      for (const auto& [entity, count] : s["expect_counts"].items()) {
        if (!count.is_number_integer() || count.get<long long>() < 0) fail(where, "expect_counts values must be non-negative integers");
        step.expect_counts[entity] = count.get<std::size_t>();
      }
    }
    if (s.contains("action")) {
      try {
        step.action = action_from_json(s["action"]);
      } catch (const Error& e) {
        fail(where, e.message());
      }
      t.steps.push_back(std::move(step));
      continue;
    }
    if (!s["chat"].is_string()) fail(where, "chat must be a string");
    step.message = s["chat"].get<std::string>();
    const auto& outputs = s.contains("outputs") ? s["outputs"] : json::object();
    if (!outputs.is_object() || !outputs.contains("orchestrator")) fail(where, "chat step needs an orchestrator output");
    for (const auto& [agent, output] : outputs.items()) {
      if (agent != "orchestrator" && agent != "filter" && agent != "visualization") {
        fail(where, "unknown agent '" + agent + "'");
      }
      const JsonSchema schema(agent_schema(agent));
      const auto issues = schema.validate(output);
      if (!issues.empty()) {
        fail(where, agent + " output: " + issues.front().reason +
                        (issues.front().locus.empty() ? "" : " at " + issues.front().locus));
      }
      if (agent == "visualization") {
        try {
          (void)parse_spec(output);
        } catch (const Error& e) {
          fail(where, "visualization output: " + e.message());
        }
      }
      step.outputs[agent] = output;
    }
    if (auto it = seen_outputs.find(*step.message); it != seen_outputs.end() && it->second != outputs) {
      fail(where, "message \"" + *step.message + "\" is scripted twice with different outputs");
    }
    seen_outputs[*step.message] = outputs;
    t.steps.push_back(std::move(step));
  }
  return t;
}

Transcript load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingResource, "cannot open transcript", path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("transcript is not valid JSON: ") + e.what(), path.string());
  }
  auto t = parse_transcript(doc, path.parent_path());
  t.source = path;
  return t;
}

std::shared_ptr<ScriptedBackend> scripted_backend(const Transcript& transcript) {
  auto backend = std::make_shared<ScriptedBackend>();
  for (const auto& step : transcript.steps) {
    if (!step.message) continue;
    for (const auto& [agent, output] : step.outputs) backend->add(agent, *step.message, {output.dump()});
  }
  return backend;
}

ReplayResult replay(const Transcript& transcript, const ContextOptions& context) {
  return replay(transcript, std::make_shared<const Package>(load_package(transcript.package_path)), context);
}

ReplayResult replay(const Transcript& transcript, std::shared_ptr<const Package> package,
                    const ContextOptions& context_options) {
  const auto backend = scripted_backend(transcript);
  const auto context = build_context(*package, context_options);
  ReplayResult out;
  out.state = new_session(transcript.session_id, package);
  for (std::size_t i = 0; i < transcript.steps.size(); ++i) {
    const auto& step = transcript.steps[i];
    ReplayStep record;
    record.index = i + 1;
    try {
      ApplyResult applied;
      if (step.message) {
        record.label = "chat: " + *step.message;
        applied = apply_chat_turn(out.state, run_pipeline(*backend, context, *package, *step.message));
      } else {
        const auto doc = to_json(*step.action);
        record.label = doc["type"].get<std::string>();
        applied = apply_action(out.state, *step.action);
        if (const auto* d = std::get_if<Download>(&*step.action)) {
          out.last_download = download(applied.state, d->entity);
          out.last_download_entity = d->entity;
        }
      }
      out.state = std::move(applied.state);
      record.events = std::move(applied.events);
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(i + 1) + ": " + e.message(), "step " + std::to_string(i + 1));
    }
    record.version = out.state.version;
    record.counts = entity_counts(*package, out.state.registry);
    for (const auto& [entity, expected] : step.expect_counts) {
      auto it = record.counts.find(entity);
      if (it == record.counts.end() || it->second != expected) record.expectation_met = false;
    }
    out.expectations_met = out.expectations_met && record.expectation_met;
    out.steps.push_back(std::move(record));
  }
  out.snapshot = snapshot(out.state);
  out.digest = snapshot_digest(out.snapshot);
  out.digest_matches = !transcript.expected_digest || *transcript.expected_digest == out.digest;
  return out;
}

}  // namespace vizlink
