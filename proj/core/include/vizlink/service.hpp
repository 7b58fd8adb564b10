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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizlink/agents.hpp"
#include "vizlink/datapackage.hpp"
#include "vizlink/session.hpp"

namespace vizlink {

// --- HTTP facade -----------------------------------------------------------------------------

/// Transport-neutral request; the HTTP server adapts its own types to this.
struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// HTTP status for an error code: 404 for unknown sessions and entities, 409 for stale versions,
/// 504 for backend timeouts, 502 for other backend failures, 422 otherwise.
int http_status(ErrorCode code) noexcept;

struct ServiceOptions {
  ContextOptions context;
  /// When set, each session is written to <dir>/<id>.json after every applied action and
  /// reloaded on construction.
  std::optional<std::filesystem::path> snapshot_dir;
};

class Service {
 public:
  Service(std::shared_ptr<const Package> package, std::shared_ptr<CompletionBackend> backend,
          ServiceOptions options = {});

  /// Thread-safe. Never throws for request-level problems; they become error responses.
  Response dispatch(const Request& request);

  [[nodiscard]] std::vector<std::string> session_ids() const;
  [[nodiscard]] const Package& package() const noexcept { return *package_; }

 private:
  struct Slot {
    std::mutex state_mutex;
    std::mutex chat_mutex;  // one agent pipeline in flight per session
    SessionState state;
  };

  Response route(const Request& request);
  Response create_session(const nlohmann::json& body);
  Response chat(Slot& slot, const nlohmann::json& body);
  Response mutate(Slot& slot, const Action& action, std::optional<std::uint64_t> version);
  std::shared_ptr<Slot> find(const std::string& id) const;
  void persist(const SessionState& state) const;
  std::string fresh_id();

  std::shared_ptr<const Package> package_;
  std::shared_ptr<CompletionBackend> backend_;
  ServiceOptions options_;
  AgentContext context_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::mutex backend_mutex_;
  std::uint64_t id_counter_ = 0;
};

// --- transcripts -----------------------------------------------------------------------------

struct TranscriptStep {
  /// Either a chat message with the scripted agent outputs, or a direct action.
  std::optional<std::string> message;
  std::map<std::string, nlohmann::json> outputs;  // agent name -> output document
  std::optional<Action> action;
  /// Optional entity counts asserted after the step.
  std::map<std::string, std::size_t> expect_counts;
};

struct Transcript {
  std::filesystem::path source;
  std::filesystem::path package_path;
  std::string session_id = "replay";
  std::vector<TranscriptStep> steps;
  std::optional<std::string> expected_digest;
};

/// Reads and checks a transcript: every scripted output must satisfy its agent schema and every
/// scripted chart must be a well-formed spec. Failures raise SchemaViolation naming the step.
Transcript load_transcript(const std::filesystem::path& path);
Transcript parse_transcript(const nlohmann::json& document, const std::filesystem::path& base_dir);

/// Backend answering with the transcript's scripted outputs.
std::shared_ptr<ScriptedBackend> scripted_backend(const Transcript& transcript);

struct ReplayStep {
  std::size_t index = 0;
  std::string label;
  std::uint64_t version = 0;
  std::vector<Event> events;
  std::map<std::string, std::size_t> counts;
  bool expectation_met = true;
};

struct ReplayResult {
  SessionState state;
  nlohmann::json snapshot;
  std::string digest;
  std::vector<ReplayStep> steps;
  /// CSV bytes of the last download step, if any.
  std::optional<std::string> last_download;
  std::optional<std::string> last_download_entity;
  bool digest_matches = true;
  bool expectations_met = true;
};

/// Runs every step against a fresh session with the scripted backend. An action error or a
/// script miss aborts with Error whose locus names the step.
ReplayResult replay(const Transcript& transcript, const ContextOptions& context = {});
ReplayResult replay(const Transcript& transcript, std::shared_ptr<const Package> package,
                    const ContextOptions& context = {});

}  // namespace vizlink
