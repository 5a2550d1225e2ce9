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

#ifndef DISTILL_AUDIT_TEXT_UTIL_H_
#define DISTILL_AUDIT_TEXT_UTIL_H_

#include <iterator>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "absl/strings/string_view.h"

template <>
struct fmt::formatter<absl::string_view> : fmt::formatter<std::string_view> {
  template <typename FormatContext>
  auto format(absl::string_view s, FormatContext& ctx) const {
    return fmt::formatter<std::string_view>::format(
        std::string_view(s.data(), s.size()), ctx);
  }
};

namespace distill_audit {

// Concatenates the "{}" formatting of each argument.
template <typename... Args>
std::string StrCat(const Args&... args) {
  std::string out;
  (fmt::format_to(std::back_inserter(out), "{}", args), ...);
  return out;
}

template <typename... Args>
void StrAppend(std::string& out, const Args&... args) {
  (fmt::format_to(std::back_inserter(out), "{}", args), ...);
}

// Lowercases UTF-8 text with the C library's Unicode simple case mapping
// (C.UTF-8 locale). Invalid byte sequences are copied through unchanged.
std::string Utf8Lowercase(std::string_view text);

// Lowercase hex SHA-256 of `data`.
std::string Sha256Hex(std::string_view data);

// Shortest decimal string that parses back to exactly `value`.
std::string FormatDouble(double value);

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_TEXT_UTIL_H_
