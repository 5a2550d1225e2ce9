//
// Copyright 2026 The Distill Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DISTILL_AUDIT_STATUS_MACROS_H_
#define DISTILL_AUDIT_STATUS_MACROS_H_

#include <utility>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define DA_STATUS_CONCAT_INNER_(a, b) a##b
#define DA_STATUS_CONCAT_(a, b) DA_STATUS_CONCAT_INNER_(a, b)

#define DA_RETURN_IF_ERROR(expr)           \
  do {                                     \
    absl::Status da_status_ = (expr);      \
    if (!da_status_.ok()) return da_status_; \
  } while (0)

#define DA_ASSIGN_OR_RETURN_IMPL_(statusor, lhs, rexpr) \
  auto statusor = (rexpr);                              \
  if (!statusor.ok()) return statusor.status();         \
  lhs = std::move(statusor).value()

// Evaluates an absl::StatusOr<T> expression, returning its status on error
// and otherwise assigning the value to `lhs`.
#define DA_ASSIGN_OR_RETURN(lhs, rexpr) \
  DA_ASSIGN_OR_RETURN_IMPL_(            \
      DA_STATUS_CONCAT_(da_statusor_, __LINE__), lhs, rexpr)

#endif  // DISTILL_AUDIT_STATUS_MACROS_H_
