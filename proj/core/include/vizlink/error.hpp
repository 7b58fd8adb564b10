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

#include <stdexcept>
#include <string>
#include <string_view>

namespace vizlink {

/// Machine-readable failure categories shared by every module.
enum class ErrorCode {
  // datapackage
  MissingResource,
  SchemaViolation,
  DanglingForeignKey,
  DuplicatePrimaryKey,
  UnknownEntity,
  AmbiguousRelation,
  // grammar
  MalformedDocument,
  UnknownTransformKind,
  UnknownChannel,
  UnknownMark,
  DuplicateAlias,
  DuplicateChannel,
  // dataflow
  UnresolvedSelection,
  UnresolvedField,
  KindMismatch,
  JoinKeyMismatch,
  EmptyGroupby,
  InvalidTransform,
  // linking
  InvalidInterval,
  UnknownField,
  // session
  StaleVersion,
  InvalidAction,
  VersionSkew,
  UnknownSession,
  // agents
  BackendTimeout,
  BackendFailure,
  ScriptMiss,
  UnresolvableField,
  ContextBudgetExceeded,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying an ErrorCode and an optional locus (JSON pointer, "entity/row/field", step index, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string locus = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& locus() const noexcept { return locus_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::string locus_;
};

}  // namespace vizlink
