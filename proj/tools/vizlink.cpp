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

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "vizlink/agents.hpp"
#include "vizlink/datapackage.hpp"
#include "vizlink/error.hpp"
#include "vizlink/service.hpp"

namespace {

using namespace vizlink;

std::string env_or(const char* name, std::string fallback) {
  const char* value = std::getenv(name);
  return value && *value ? std::string(value) : std::move(fallback);
}

int run_validate(const std::string& path) {
  const auto pkg = load_package(path);
  std::cout << "package " << pkg.name << ": " << pkg.entities.size() << " entities, " << pkg.relations.size()
            << " relations\n";
  for (const auto& e : pkg.entities) {
    std::cout << "  " << e.name << ": " << e.fields.size() << " fields, " << e.row_count() << " rows\n";
  }
  for (const auto& w : pkg.warnings) std::cout << "warning: " << w << "\n";
  return 0;
}

int run_replay(const std::string& path, bool print_snapshot, const std::string& download_out) {
  const auto transcript = load_transcript(path);
  const auto result = replay(transcript);
  for (const auto& step : result.steps) {
    std::cout << "step " << step.index << " v" << step.version << " " << step.label << " |";
    for (const auto& [entity, count] : step.counts) std::cout << " " << entity << "=" << count;
    if (!step.expectation_met) std::cout << " EXPECTATION FAILED";
    std::cout << "\n";
  }
  if (!download_out.empty() && result.last_download) {
    std::ofstream(download_out, std::ios::binary) << *result.last_download;
  }
  if (print_snapshot) std::cout << result.snapshot.dump(2) << "\n";
  std::cout << "digest " << result.digest << "\n";
  if (!result.digest_matches) {
    std::cerr << "digest mismatch: expected " << *transcript.expected_digest << "\n";
    return 1;
  }
  return result.expectations_met ? 0 : 1;
}

struct ServeOptions {
  std::string package;
  std::string backend;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string snapshot_dir;
  std::string static_dir;
  std::size_t category_threshold = 50;
  std::size_t context_budget = 64 * 1024;
  int timeout_s = 60;
};

int run_serve(const ServeOptions& o) {
  auto package = std::make_shared<const Package>(load_package(o.package));
  std::shared_ptr<CompletionBackend> backend;
  if (o.backend.rfind("scripted:", 0) == 0) {
    backend = scripted_backend(load_transcript(o.backend.substr(9)));
  } else if (o.backend == "remote") {
    RemoteOptions ro;
    ro.base_url = env_or("VIZLINK_BACKEND_URL", "");
    ro.model = env_or("VIZLINK_MODEL", "");
    ro.token_env = "VIZLINK_API_TOKEN";
    ro.timeout = std::chrono::seconds(o.timeout_s);
    backend = std::make_shared<RemoteBackend>(ro);
  } else {
    std::cerr << "backend must be scripted:<transcript> or remote\n";
    return 2;
  }
  ServiceOptions so;
  so.context.category_threshold = o.category_threshold;
  so.context.budget_bytes = o.context_budget;
  if (!o.snapshot_dir.empty()) so.snapshot_dir = o.snapshot_dir;
  Service service(package, backend, so);

  httplib::Server server;
  if (!o.static_dir.empty() && !server.set_mount_point("/", o.static_dir)) {
    std::cerr << "static directory " << o.static_dir << " not found\n";
    return 2;
  }
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query[k] = v;
    const auto out = service.dispatch(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  for (const char* pattern : {"/sessions.*", "/schema/.*"}) {
    server.Get(pattern, handler);
    server.Post(pattern, handler);
    server.Patch(pattern, handler);
    server.Delete(pattern, handler);
  }
  std::cout << "serving " << package->name << " on http://" << o.host << ":" << o.port << std::endl;
  return server.listen(o.host, o.port) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vizlink: linked-view data discovery over data packages"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Load a data package and report its shape");
  validate->add_option("package", validate_path, "datapackage.json or its directory")->required();

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--package", serve_opts.package, "datapackage.json or its directory")->required();
  serve->add_option("--backend", serve_opts.backend, "scripted:<transcript> or remote")->required();
  serve->add_option("--host", serve_opts.host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_opts.port, "Port")->capture_default_str();
  serve->add_option("--snapshots", serve_opts.snapshot_dir, "Directory for per-session snapshots");
  serve->add_option("--static", serve_opts.static_dir, "Directory of front-end files served at /");
  serve->add_option("--category-threshold", serve_opts.category_threshold, "Max categories given to agents")
      ->envname("VIZLINK_CATEGORY_THRESHOLD")
      ->capture_default_str();
  serve->add_option("--context-budget", serve_opts.context_budget, "Max agent context size in bytes")
      ->envname("VIZLINK_CONTEXT_BUDGET")
      ->capture_default_str();
  serve->add_option("--timeout", serve_opts.timeout_s, "Remote backend timeout in seconds")->capture_default_str();

  std::string transcript_path;
  std::string download_out;
  bool print_snapshot = false;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a transcript with its scripted agent outputs");
  replay_cmd->add_option("transcript", transcript_path, "Transcript JSON file")->required();
  replay_cmd->add_flag("--snapshot", print_snapshot, "Print the final snapshot");
  replay_cmd->add_option("--download", download_out, "Write the last downloaded CSV here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*validate) return run_validate(validate_path);
    if (*serve) return run_serve(serve_opts);
    return run_replay(transcript_path, print_snapshot, download_out);
  } catch (const vizlink::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
