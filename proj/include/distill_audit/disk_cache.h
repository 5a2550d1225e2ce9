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

#ifndef DISTILL_AUDIT_DISK_CACHE_H_
#define DISTILL_AUDIT_DISK_CACHE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "distill_audit/trace.h"

namespace distill_audit {

// 256-bit content address of one inference request.
struct CacheKey {
  std::string digest;  // 64 lowercase hex characters

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

inline constexpr std::string_view kGenerationRequest = "generation";
inline constexpr std::string_view kInputRequest = "input";

// SHA-256 of the canonical (sorted-key, compact) JSON encoding of
// {decode, kind, model_id, prompt}. `decode` is omitted for input requests.
CacheKey MakeCacheKey(std::string_view model_id, std::string_view kind,
                      std::string_view prompt, const DecodeParams* decode);

// Content-addressed payload store: one file per key under
// <dir>/<digest[0:2]>/<digest>.json. Each file records the payload's own
// SHA-256; a file that fails the check reads as a miss. Writes go through a
// temporary file and a rename.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir);

  std::optional<std::string> Lookup(const CacheKey& key) const;
  absl::Status Store(const CacheKey& key, std::string_view payload) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path PathFor(const CacheKey& key) const;

  std::filesystem::path dir_;
};

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_DISK_CACHE_H_
