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

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizlink/datapackage.hpp"
#include "vizlink/error.hpp"
#include "vizlink/grammar.hpp"
#include "vizlink/selection.hpp"
#include "vizlink/session.hpp"

namespace vizlink {

// --- context ---------------------------------------------------------------------------------

struct ContextOptions {
  /// Categorical fields with more distinct values than this are left out.
  std::size_t category_threshold = 50;
  /// Upper bound on the rendered context in bytes.
  std::size_t budget_bytes = 64 * 1024;
};

struct ContextField {
  std::string name;
  FieldKind kind = FieldKind::nominal;
  std::string description;
  std::optional<double> min;
  std::optional<double> max;
  std::vector<Cell> categories;  // null included when present in the data
};

struct ContextEntity {
  std::string name;
  std::string description;
  std::size_t rows = 0;
  std::vector<ContextField> fields;
};

/// Data description handed to every agent. Domains describe the whole dataset, not the
/// currently filtered view.
struct AgentContext {
  std::vector<ContextEntity> entities;
  std::vector<Relationship> relations;
  std::vector<std::string> excluded;  // "entity.field" left out (identifiers, high cardinality)
  std::string text;

  const ContextEntity* find_entity(std::string_view name) const noexcept;
  const ContextField* find_field(std::string_view entity, std::string_view field) const noexcept;
};

/// Throws Error(ContextBudgetExceeded) when the rendered text exceeds the budget.
AgentContext build_context(const Package& package, const ContextOptions& options = {});

// --- backends --------------------------------------------------------------------------------

/// One structured-completion request. `agent` is orchestrator, filter, or visualization.
struct Prompt {
  std::string agent;
  std::string message;
  std::string text;
  const nlohmann::json* schema = nullptr;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  /// Returns the raw model output (expected to be a JSON document).
  virtual std::string complete(const Prompt& prompt) = 0;
};

/// Replays canned outputs keyed on (agent, exact user message). Repeated requests for the same
/// key walk through the list and then stick on its last element.
class ScriptedBackend final : public CompletionBackend {
 public:
  void add(std::string agent, std::string message, std::vector<std::string> outputs);
  std::string complete(const Prompt& prompt) override;
  [[nodiscard]] std::size_t size() const noexcept { return script_.size(); }

 private:
  struct Slot {
    std::vector<std::string> outputs;
    std::size_t next = 0;
  };
  std::map<std::pair<std::string, std::string>, Slot> script_;
};

struct RemoteOptions {
  std::string base_url;  // e.g. https://api.openai.com
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string token_env = "VIZLINK_API_TOKEN";
  std::chrono::seconds timeout{60};
};

/// OpenAI-compatible chat-completions client with temperature 0 and schema-constrained output.
/// The bearer token is read from the environment variable named in the options.
class RemoteBackend final : public CompletionBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);
  std::string complete(const Prompt& prompt) override;

 private:
  RemoteOptions options_;
};

// --- agents ----------------------------------------------------------------------------------

struct Route {
  bool wants_filter = false;
  bool wants_viz = false;
  std::string reply;
};

enum class FilterKind { interval, point };

struct FilterCommand {
  std::string entity;
  std::string field;
  FilterKind kind = FilterKind::interval;
  std::optional<double> min;
  std::optional<double> max;
  std::vector<Cell> values;
};

/// Raised when an agent keeps producing invalid output. Carries every raw attempt.
class AgentFailure : public Error {
 public:
  AgentFailure(std::string agent, std::string reason, nlohmann::json attempts);
  const nlohmann::json& attempts() const noexcept { return attempts_; }

 private:
  nlohmann::json attempts_;
};

/// Fills a missing interval bound with the observed extreme and checks the command against the
/// context. Throws Error(UnresolvableField | KindMismatch | InvalidInterval).
FilterCommand resolve_filter(FilterCommand command, const AgentContext& context);
Selection to_selection(const FilterCommand& command);

nlohmann::json to_json(const Route& route);
nlohmann::json to_json(const FilterCommand& command);

/// Fills the {{context}} and {{message}} placeholders of a prompt template asset.
std::string render_prompt(std::string_view template_text, const AgentContext& context, std::string_view message);

/// Each agent call validates the output against its schema and the package; one corrective
/// re-prompt is made before AgentFailure (code SchemaViolation) is raised. Raw attempts are
/// appended to `trace`.
Route orchestrate(CompletionBackend& backend, const AgentContext& context, const std::string& message,
                  nlohmann::json& trace);
std::vector<FilterCommand> run_filter_agent(CompletionBackend& backend, const AgentContext& context,
                                            const std::string& message, nlohmann::json& trace);
VizSpec run_viz_agent(CompletionBackend& backend, const AgentContext& context, const Package& package,
                      const std::string& message, nlohmann::json& trace);

/// Routes the message and runs the requested agents. The result is ready for apply_chat_turn.
ChatTurn run_pipeline(CompletionBackend& backend, const AgentContext& context, const Package& package,
                      const std::string& message);

const nlohmann::json& agent_schema(std::string_view agent);

}  // namespace vizlink
