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

#include "vizlink/error.hpp"

namespace vizlink {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingResource: return "MissingResource";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DanglingForeignKey: return "DanglingForeignKey";
    case ErrorCode::DuplicatePrimaryKey: return "DuplicatePrimaryKey";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::AmbiguousRelation: return "AmbiguousRelation";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::UnknownTransformKind: return "UnknownTransformKind";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::UnknownMark: return "UnknownMark";
    case ErrorCode::DuplicateAlias: return "DuplicateAlias";
    case ErrorCode::DuplicateChannel: return "DuplicateChannel";
    case ErrorCode::UnresolvedSelection: return "UnresolvedSelection";
    case ErrorCode::UnresolvedField: return "UnresolvedField";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::JoinKeyMismatch: return "JoinKeyMismatch";
    case ErrorCode::EmptyGroupby: return "EmptyGroupby";
    case ErrorCode::InvalidTransform: return "InvalidTransform";
    case ErrorCode::InvalidInterval: return "InvalidInterval";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::StaleVersion: return "StaleVersion";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::VersionSkew: return "VersionSkew";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::BackendTimeout: return "BackendTimeout";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::ScriptMiss: return "ScriptMiss";
    case ErrorCode::UnresolvableField: return "UnresolvableField";
    case ErrorCode::ContextBudgetExceeded: return "ContextBudgetExceeded";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& message, const std::string& locus) {
  std::string out(to_string(code));
  out += ": ";
  out += message;
  if (!locus.empty()) {
    out += " (at ";
    out += locus;
    out += ")";
  }
  return out;
}

}  // namespace

Error::Error(ErrorCode code, std::string message, std::string locus)
    : std::runtime_error(compose(code, message, locus)),
      code_(code),
      message_(std::move(message)),
      locus_(std::move(locus)) {}

}  // namespace vizlink
